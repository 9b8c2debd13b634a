#pragma once

#include "minitad/core/feature_sequence.hpp"
#include "minitad/core/types.hpp"

#include <random>
#include <string>
#include <utility>
#include <vector>

namespace minitad::data {

enum class MappingMode { kRescale, kRandomCrop, kSlidingWindow };

[[nodiscard]] const char* to_string(MappingMode mode);
[[nodiscard]] MappingMode parse_mapping_mode(const std::string& name);

/// How variable-length videos become fixed-length training samples.
struct TemporalMappingConfig {
  MappingMode mode = MappingMode::kRandomCrop;
  int target_length = 256;
  // Window overlap is configured separately for training and inference.
  double train_overlap = 0.5;
  double test_overlap = 0.5;
  // Fraction of a ground-truth action that must survive a crop/window.
  double keep_threshold = 0.75;

  void validate() const;
};

/// A fixed-length view [offset, offset + length) of a source sequence whose
/// last `pad_length` rows lie past the source end.
struct WindowSpec {
  std::string video_id;
  Eigen::Index offset = 0;
  Eigen::Index length = 0;
  Eigen::Index pad_length = 0;

  [[nodiscard]] Eigen::Index valid_length() const { return length - pad_length; }
  friend bool operator==(const WindowSpec&, const WindowSpec&) = default;
};

/// Linear interpolation to exactly `target_length` rows, sampling the source
/// at i * (L - 1) / (T - 1) so endpoints map to endpoints.
FeatureSequence rescale_sequence(const FeatureSequence& features, Eigen::Index target_length);

/// Uniform random window; sources shorter than the target are zero-padded.
std::pair<FeatureSequence, WindowSpec> random_crop(const FeatureSequence& features,
                                                   Eigen::Index target_length, std::mt19937_64& rng);

/// Covering windows with stride round(T * (1 - overlap)); the last window is
/// right-aligned to the source end.
std::vector<WindowSpec> sliding_windows(Eigen::Index length, Eigen::Index target_length, double overlap_ratio);

/// Materializes a window, zero-padding past the source end.
FeatureSequence extract_window(const FeatureSequence& features, const WindowSpec& window);

/// Moves source-coordinate instances into window coordinates, keeping those
/// whose surviving length is at least `keep_threshold` of the original.
std::vector<ActionInstance> remap_annotations(const std::vector<ActionInstance>& instances,
                                              const WindowSpec& window, double keep_threshold);

}  // namespace minitad::data
