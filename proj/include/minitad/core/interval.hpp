#pragma once

#include "minitad/core/types.hpp"

namespace minitad {

// Added to denominators of degenerate pairs so downstream values stay finite.
inline constexpr double kDegenerateEps = 1e-8;

/// Overlap measures of a pair of intervals, all computed in one pass.
struct PairGeometry {
  double intersection = 0.0;
  double union_length = 0.0;
  double enclosure = 0.0;
  double center_distance = 0.0;
  // True when the union (and hence enclosure) has zero length.
  bool degenerate = false;
};

[[nodiscard]] PairGeometry pair_geometry(const TimeInterval& a, const TimeInterval& b);

/// Temporal intersection-over-union; 0 for two coincident points.
[[nodiscard]] double tiou(const TimeInterval& a, const TimeInterval& b);

/// 1-D generalized IoU: tiou - (enclosure - union) / enclosure.
[[nodiscard]] double giou_term(const TimeInterval& a, const TimeInterval& b);

/// 1-D distance IoU: tiou - center_distance^2 / enclosure^2.
[[nodiscard]] double diou_term(const TimeInterval& a, const TimeInterval& b);

/// True when the geometry of the pair is undefined without the epsilon guard.
[[nodiscard]] bool is_degenerate_pair(const TimeInterval& a, const TimeInterval& b);

/// Clips `a` into `bounds`. An interval clipped away collapses to the nearest bound.
[[nodiscard]] TimeInterval clamp_interval(const TimeInterval& a, const TimeInterval& bounds);

}  // namespace minitad
