#include "minitad/heads/assignment.hpp"

#include "minitad/core/interval.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace minitad::heads {

const char* to_string(AssignStrategy s) {
  switch (s) {
    case AssignStrategy::kCenterRadius: return "center_radius";
    case AssignStrategy::kMaxIou: return "max_iou";
    case AssignStrategy::kInsideGt: return "inside_gt";
  }
  return "?";
}

AssignStrategy parse_assign_strategy(const std::string& name) {
  if (name == "center_radius") return AssignStrategy::kCenterRadius;
  if (name == "max_iou") return AssignStrategy::kMaxIou;
  if (name == "inside_gt") return AssignStrategy::kInsideGt;
  throw std::invalid_argument("unknown assignment strategy '" + name + "'");
}

std::vector<std::pair<double, double>> AssignmentConfig::ranges_for(std::size_t levels) const {
  if (!regression_ranges.empty()) return regression_ranges;
  std::vector<std::pair<double, double>> out;
  for (std::size_t l = 0; l < levels; ++l) {
    const double lo = l == 0 ? 0.0 : range_base * std::ldexp(1.0, static_cast<int>(l) - 1);
    const double hi = l + 1 == levels ? std::numeric_limits<double>::infinity()
                                      : range_base * std::ldexp(1.0, static_cast<int>(l));
    out.emplace_back(lo, hi);
  }
  return out;
}

void AssignmentConfig::validate(std::size_t levels) const {
  if (radius < 0.0) throw std::invalid_argument("assignment radius must be non-negative");
  if (!(iou_pos_threshold > 0.0 && iou_pos_threshold <= 1.0)) {
    throw std::invalid_argument("iou_pos_threshold must lie in (0, 1]");
  }
  if (!(range_base > 0.0)) throw std::invalid_argument("range_base must be positive");
  const auto ranges = ranges_for(levels);
  if (ranges.size() != levels) throw std::invalid_argument("need one regression range per pyramid level");
  if (ranges.front().first != 0.0) throw std::invalid_argument("regression ranges must start at 0");
  if (!std::isinf(ranges.back().second)) throw std::invalid_argument("last regression range must be unbounded");
  for (std::size_t l = 0; l < ranges.size(); ++l) {
    if (!(ranges[l].first < ranges[l].second)) throw std::invalid_argument("empty regression range");
    if (l > 0 && ranges[l].first != ranges[l - 1].second) {
      throw std::invalid_argument("regression ranges must be contiguous");
    }
  }
}

Index Targets::num_positive() const {
  Index n = 0;
  for (int l : label) n += l >= 0;
  return n;
}

Targets assign_labels(const AnchorSet& anchors, const std::vector<Index>& valid_per_level,
                      const std::vector<ActionInstance>& gt, const AssignmentConfig& config) {
  if (valid_per_level.size() != anchors.levels.size()) throw std::invalid_argument("valid lengths per level");
  if (config.strategy == AssignStrategy::kMaxIou && anchors.anchor_free) {
    throw std::invalid_argument("max_iou assignment requires anchors");
  }
  const auto ranges = config.ranges_for(anchors.levels.size());
  const auto n = static_cast<std::size_t>(anchors.total_anchors());
  Targets t;
  t.label.assign(n, -1);
  t.box.assign(n, TimeInterval{});
  t.valid.assign(n, 0);

  for (std::size_t l = 0; l < anchors.levels.size(); ++l) {
    const AnchorLevel& level = anchors.levels[l];
    const Index base = anchors.level_offset(l);
    for (int a = 0; a < anchors.per_location; ++a) {
      for (Index i = 0; i < level.locations; ++i) {
        const auto idx = static_cast<std::size_t>(base + a * level.locations + i);
        if (i >= valid_per_level[l]) continue;
        t.valid[idx] = 1;
        const double c = level.center(i);
        int best = -1;
        double best_len = std::numeric_limits<double>::infinity();
        double best_iou = -1.0;
        for (std::size_t g = 0; g < gt.size(); ++g) {
          const TimeInterval& box = gt[g].interval;
          const double len = box.length();
          bool ok = false;
          double iou = 0.0;
          if (config.strategy == AssignStrategy::kMaxIou) {
            const double al = level.anchor_lengths[static_cast<std::size_t>(a)];
            iou = tiou({c - 0.5 * al, c + 0.5 * al}, box);
            ok = iou >= config.iou_pos_threshold;
          } else {
            const bool inside = c >= box.start && c <= box.end;
            const bool in_range = len > ranges[l].first && len <= ranges[l].second;
            ok = inside && in_range;
            if (config.strategy == AssignStrategy::kCenterRadius) {
              ok = ok && std::abs(c - box.center()) <= config.radius * level.stride;
            }
          }
          if (!ok) continue;
          const bool better = config.strategy == AssignStrategy::kMaxIou
                                  ? (iou > best_iou || (iou == best_iou && len < best_len))
                                  : len < best_len;
          if (better) {
            best = static_cast<int>(g);
            best_len = len;
            best_iou = iou;
          }
        }
        if (best >= 0) {
          t.label[idx] = gt[static_cast<std::size_t>(best)].label;
          t.box[idx] = gt[static_cast<std::size_t>(best)].interval;
        }
      }
    }
  }
  return t;
}

Eigen::MatrixXd temporal_evaluation_targets(const std::vector<ActionInstance>& gt, Index length, int stride) {
  Eigen::MatrixXd curves = Eigen::MatrixXd::Zero(length, 3);
  for (const auto& inst : gt) {
    const TimeInterval& b = inst.interval;
    const double half = 0.5 * std::max(static_cast<double>(stride), 0.1 * b.length());
    for (Index i = 0; i < length; ++i) {
      const double c = (static_cast<double>(i) + 0.5) * stride;
      if (c >= b.start && c <= b.end) curves(i, 0) = 1.0;
      if (std::abs(c - b.start) <= half) curves(i, 1) = 1.0;
      if (std::abs(c - b.end) <= half) curves(i, 2) = 1.0;
    }
  }
  return curves;
}

}  // namespace minitad::heads
