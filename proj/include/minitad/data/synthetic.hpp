#pragma once

#include "minitad/data/annotations.hpp"
#include "minitad/data/feature_store.hpp"

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

namespace minitad::data {

/// Parameters of the planted-action dataset. Each action is a run of rows
/// equal to a fixed per-class signature (RMS 1) scaled by
/// `class_signature_strength`, on top of white noise of `noise_std`.
struct SyntheticSpec {
  int num_videos = 200;
  int feature_dim = 32;
  std::pair<int, int> length_range{128, 256};
  int num_classes = 5;
  std::pair<int, int> actions_per_video{1, 4};
  std::pair<double, double> duration_fraction_range{0.05, 0.25};
  double class_signature_strength = 2.0;
  double noise_std = 1.0;
  std::uint64_t seed = 0;
  // Trailing fraction of videos placed in the validation subset.
  double val_fraction = 0.2;
  double frame_rate = 25.0;
  double feature_stride = 5.0;

  void validate() const;
};

class SyntheticPlacementError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SyntheticDataset {
  AnnotationDatabase database;
  FeatureStore features;
  // One row per class, unscaled.
  Eigen::MatrixXd signatures;
};

/// Deterministic in `spec.seed`. Planted actions within a video never
/// overlap or touch; boundaries fall on whole rows.
SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace minitad::data
