#pragma once

#include "minitad/heads/anchors.hpp"

#include <string>
#include <utility>
#include <vector>

namespace minitad::heads {

enum class AssignStrategy { kCenterRadius, kMaxIou, kInsideGt };

[[nodiscard]] const char* to_string(AssignStrategy s);
[[nodiscard]] AssignStrategy parse_assign_strategy(const std::string& name);

struct AssignmentConfig {
  AssignStrategy strategy = AssignStrategy::kCenterRadius;
  double radius = 1.5;  // stride units
  double iou_pos_threshold = 0.5;
  // (lo, hi] ground-truth lengths per level; empty derives them from `range_base`.
  std::vector<std::pair<double, double>> regression_ranges;
  double range_base = 8.0;

  // Level l covers (base * 2^(l-1), base * 2^l]; the first starts at 0 and
  // the last is unbounded.
  [[nodiscard]] std::vector<std::pair<double, double>> ranges_for(std::size_t levels) const;
  void validate(std::size_t levels) const;
};

/// Per-anchor targets in AnchorSet flattened order.
struct Targets {
  std::vector<int> label;          // -1 for background
  std::vector<TimeInterval> box;   // matched ground truth of positives
  std::vector<char> valid;         // location lies in the unpadded prefix

  [[nodiscard]] Index num_positive() const;
  [[nodiscard]] bool positive(std::size_t i) const { return label[i] >= 0; }
};

/// Ground truth is in input-feature coordinates. Center-radius additionally
/// requires the location center to lie inside the ground truth. Competing
/// ground truths resolve to the shortest.
Targets assign_labels(const AnchorSet& anchors, const std::vector<Index>& valid_per_level,
                      const std::vector<ActionInstance>& gt, const AssignmentConfig& config);

/// Actionness / startness / endness curves sampled at location centers
/// (i + 0.5) * stride. Boundary neighbourhoods have width
/// max(stride, 0.1 * length) centered on each boundary.
Eigen::MatrixXd temporal_evaluation_targets(const std::vector<ActionInstance>& gt, Index length, int stride = 1);

}  // namespace minitad::heads
