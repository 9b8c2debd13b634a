#pragma once

#include "minitad/core/types.hpp"

#include <Eigen/Dense>
#include <vector>

namespace minitad::heads {

using Index = Eigen::Index;

struct AnchorConfig {
  // Segment lengths carried by every location; empty selects anchor-free.
  std::vector<double> lengths;
  // Multiply `lengths` by the level stride.
  bool scale_with_stride = true;

  [[nodiscard]] bool anchor_free() const { return lengths.empty(); }
  [[nodiscard]] int per_location() const { return anchor_free() ? 1 : static_cast<int>(lengths.size()); }
  void validate() const;
};

struct AnchorLevel {
  int stride = 1;
  Index locations = 0;
  std::vector<double> anchor_lengths;  // absolute, input-feature units

  [[nodiscard]] double center(Index i) const { return (static_cast<double>(i) + 0.5) * stride; }
  [[nodiscard]] Eigen::VectorXd centers() const;
};

/// Candidate positions of a pyramid. Flattened order is level, then anchor,
/// then location: index = offset(level) + a * locations + i.
struct AnchorSet {
  std::vector<AnchorLevel> levels;
  int per_location = 1;
  bool anchor_free = true;

  [[nodiscard]] Index total_locations() const;
  [[nodiscard]] Index total_anchors() const { return total_locations() * per_location; }
  [[nodiscard]] Index level_offset(std::size_t level) const;
};

AnchorSet generate_anchors(const std::vector<Index>& level_lengths, const std::vector<int>& strides,
                           const AnchorConfig& config);

// Anchor-free targets are boundary distances from the location center in
// stride units.
[[nodiscard]] Eigen::Vector2d encode_anchor_free(const TimeInterval& gt, double center, int stride);
[[nodiscard]] TimeInterval decode_anchor_free(double center, int stride, double d_start, double d_end);

// Anchor-based targets: (center shift / anchor length, log length ratio).
[[nodiscard]] Eigen::Vector2d encode_anchor_based(const TimeInterval& gt, double center, double anchor_length);
[[nodiscard]] TimeInterval decode_anchor_based(double center, double anchor_length, double d_center,
                                               double d_log_length);

}  // namespace minitad::heads
