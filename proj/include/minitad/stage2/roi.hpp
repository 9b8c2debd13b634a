#pragma once

#include "minitad/core/types.hpp"
#include "minitad/neck/neck.hpp"

#include <string>
#include <vector>

namespace minitad::stage2 {

using ag::Index;
using ag::Matrix;
using ag::Tensor;

enum class RoiMethod { kKeypoint, kRoiAlign, kSgAlign, kBoundaryMatching };

[[nodiscard]] const char* to_string(RoiMethod m);
[[nodiscard]] RoiMethod parse_roi_method(const std::string& name);
[[nodiscard]] const std::vector<RoiMethod>& all_roi_methods();

struct RoIConfig {
  RoiMethod method = RoiMethod::kRoiAlign;
  int samples = 16;
  // Context added on each side, as a fraction of the proposal length
  // (keypoint and roialign).
  double extension_ratio = 0.25;
  int bm_max_duration = 0;  // 0: no cap
  int level = 0;            // pyramid level feeding Stage 2

  // Rows produced per proposal (3 for keypoint).
  [[nodiscard]] int rows_per_proposal() const { return method == RoiMethod::kKeypoint ? 3 : samples; }
  void validate() const;
};

// Sampling kernel shared by every extractor. Row i of a sequence sits at
// position i + 0.5; positions are clamped to [0.5, valid - 0.5] and read by
// linear interpolation between neighbouring rows.
[[nodiscard]] ag::LerpTap interpolation_tap(double position, Index valid);
// Bin centers s + (k + 0.5) (e - s) / K.
[[nodiscard]] std::vector<double> bin_centers(const TimeInterval& interval, int samples);
Tensor sample_positions(const Tensor& features, Index valid, const std::vector<double>& positions);

/// K x D bins spanning `proposal`.
Tensor roi_align(const Tensor& features, Index valid, const TimeInterval& proposal, int samples);
/// 3 x D samples at start, center, end.
Tensor roi_keypoint(const Tensor& features, Index valid, const TimeInterval& proposal);
/// One graph aggregation over the whole sequence, then roi_align.
Tensor sg_align(const Tensor& features, Index valid, const TimeInterval& proposal, int samples,
                const neck::GraphAggregation& graph);

/// Dense [d][s] map over every start s and duration d = 1..max_duration.
/// Entry (s, d) is roi_align([s, s + d], K); pairs with s + d > T stay zero.
struct BoundaryMatchingMap {
  Index length = 0;
  Index max_duration = 0;
  int samples = 0;
  Tensor values;  // (max_duration * length * samples) x D

  [[nodiscard]] bool valid(Index start, Index duration) const;
  [[nodiscard]] Index row(Index start, Index duration) const;
  [[nodiscard]] Matrix entry(Index start, Index duration) const;
  [[nodiscard]] Index valid_pairs() const;
};

BoundaryMatchingMap boundary_matching(const Tensor& features, Index valid, int samples, Index max_duration = 0);

class UnsupportedConfiguration : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Single-scale only; a pyramid with more than one level is rejected.
BoundaryMatchingMap boundary_matching(const neck::FeaturePyramid& pyramid, const RoIConfig& config);

/// N x (K * D) features for a batch of proposals under `config`.
/// `graph` is required for sgalign.
Tensor extract_rois(const Tensor& features, Index valid, const std::vector<TimeInterval>& proposals,
                    const RoIConfig& config, const neck::GraphAggregation* graph = nullptr);

}  // namespace minitad::stage2
