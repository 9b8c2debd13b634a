#include "minitad/core/interval.hpp"

#include <algorithm>
#include <cmath>

namespace minitad {

PairGeometry pair_geometry(const TimeInterval& a, const TimeInterval& b) {
  PairGeometry g;
  g.intersection = std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
  g.union_length = a.length() + b.length() - g.intersection;
  g.enclosure = std::max(a.end, b.end) - std::min(a.start, b.start);
  g.center_distance = std::abs(a.center() - b.center());
  g.degenerate = g.union_length <= 0.0;
  return g;
}

namespace {

double tiou_of(const PairGeometry& g) {
  if (g.degenerate) return 0.0;
  return g.intersection / g.union_length;
}

}  // namespace

double tiou(const TimeInterval& a, const TimeInterval& b) { return tiou_of(pair_geometry(a, b)); }

double giou_term(const TimeInterval& a, const TimeInterval& b) {
  const PairGeometry g = pair_geometry(a, b);
  if (g.enclosure <= 0.0) return 0.0;
  const double enclosure = g.degenerate ? g.enclosure + kDegenerateEps : g.enclosure;
  return tiou_of(g) - (enclosure - g.union_length) / enclosure;
}

double diou_term(const TimeInterval& a, const TimeInterval& b) {
  const PairGeometry g = pair_geometry(a, b);
  if (g.enclosure <= 0.0) return 0.0;
  const double enclosure = g.degenerate ? g.enclosure + kDegenerateEps : g.enclosure;
  return tiou_of(g) - (g.center_distance * g.center_distance) / (enclosure * enclosure);
}

bool is_degenerate_pair(const TimeInterval& a, const TimeInterval& b) {
  return pair_geometry(a, b).degenerate;
}

TimeInterval clamp_interval(const TimeInterval& a, const TimeInterval& bounds) {
  TimeInterval out{std::clamp(a.start, bounds.start, bounds.end),
                   std::clamp(a.end, bounds.start, bounds.end)};
  if (out.start > out.end) out.start = out.end;
  return out;
}

}  // namespace minitad
