#include "minitad/postproc/suppression.hpp"

#include "minitad/core/interval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace minitad::postproc {

namespace {

double score_of(const ActionInstance& a) { return a.score.value_or(0.0); }

// Index order: descending score, then earlier start, then input position.
std::vector<std::size_t> ranked(const std::vector<ActionInstance>& items) {
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double sa = score_of(items[a]);
    const double sb = score_of(items[b]);
    if (sa != sb) return sa > sb;
    return items[a].interval.start < items[b].interval.start;
  });
  return order;
}

}  // namespace

ProposalSet nms(const ProposalSet& set, double iou_threshold, bool per_class) {
  ProposalSet out = set;
  out.proposals.clear();
  for (std::size_t i : ranked(set.proposals)) {
    const ActionInstance& cand = set.proposals[i];
    bool keep = true;
    for (const auto& kept : out.proposals) {
      if (per_class && kept.label != cand.label) continue;
      if (tiou(kept.interval, cand.interval) > iou_threshold) {
        keep = false;
        break;
      }
    }
    if (keep) out.proposals.push_back(cand);
  }
  return out;
}

const char* to_string(SoftNmsMethod m) { return m == SoftNmsMethod::kLinear ? "linear" : "gaussian"; }

SoftNmsMethod parse_soft_nms_method(const std::string& name) {
  if (name == "linear") return SoftNmsMethod::kLinear;
  if (name == "gaussian") return SoftNmsMethod::kGaussian;
  throw std::invalid_argument("unknown soft-nms method '" + name + "'");
}

void SoftNmsConfig::validate() const {
  if (!(sigma > 0.0)) throw std::invalid_argument("soft-nms sigma must be positive");
  if (iou_threshold < 0.0 || iou_threshold > 1.0) throw std::invalid_argument("soft-nms threshold in [0, 1]");
  if (score_floor < 0.0) throw std::invalid_argument("soft-nms score_floor must be non-negative");
}

ProposalSet soft_nms(const ProposalSet& set, const SoftNmsConfig& config) {
  config.validate();
  struct Live {
    ActionInstance inst;
    std::size_t index;
  };
  std::vector<Live> live;
  live.reserve(set.proposals.size());
  for (std::size_t i = 0; i < set.proposals.size(); ++i) live.push_back({set.proposals[i], i});

  ProposalSet out = set;
  out.proposals.clear();
  while (!live.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < live.size(); ++i) {
      const double si = score_of(live[i].inst);
      const double sb = score_of(live[best].inst);
      if (si > sb || (si == sb && (live[i].inst.interval.start < live[best].inst.interval.start ||
                                   (live[i].inst.interval.start == live[best].inst.interval.start &&
                                    live[i].index < live[best].index)))) {
        best = i;
      }
    }
    const ActionInstance picked = live[best].inst;
    live.erase(live.begin() + static_cast<std::ptrdiff_t>(best));
    out.proposals.push_back(picked);

    std::vector<Live> next;
    next.reserve(live.size());
    for (auto& l : live) {
      if (!config.per_class || l.inst.label == picked.label) {
        const double o = tiou(picked.interval, l.inst.interval);
        double s = score_of(l.inst);
        if (config.method == SoftNmsMethod::kLinear) {
          if (o > config.iou_threshold) s *= 1.0 - o;
        } else {
          s *= std::exp(-(o * o) / config.sigma);
        }
        l.inst.score = s;
      }
      if (score_of(l.inst) >= config.score_floor) next.push_back(l);
    }
    live = std::move(next);
  }
  return out;
}

ProposalSet aggregate_windows(const std::vector<ProposalSet>& window_sets) {
  ProposalSet out;
  out.unit = TimeUnit::kSeconds;
  if (window_sets.empty()) return out;
  out.video_id = window_sets.front().video_id;
  out.feature_stride = window_sets.front().feature_stride;
  out.frame_rate = window_sets.front().frame_rate;
  for (const auto& w : window_sets) {
    if (w.video_id != out.video_id) {
      throw std::invalid_argument("aggregate_windows: mixed video ids '" + out.video_id + "' and '" + w.video_id + "'");
    }
    require_unit(TimeUnit::kFeature, w.unit);
    const double offset = static_cast<double>(w.window_offset.value_or(0));
    const double sec = w.feature_stride / w.frame_rate;
    for (const auto& p : w.proposals) {
      ActionInstance q = p;
      q.interval = {(p.interval.start + offset) * sec, (p.interval.end + offset) * sec};
      out.proposals.push_back(q);
    }
  }
  return out;
}

MissingExternalScores::MissingExternalScores(const std::string& video_id)
    : std::out_of_range("no external classifier scores for video '" + video_id + "'") {}

ProposalSet fuse_external_classifier(const ProposalSet& set, const ExternalScores& scores, int top_k) {
  const auto it = scores.find(set.video_id);
  if (it == scores.end()) throw MissingExternalScores(set.video_id);
  auto classes = it->second;
  std::stable_sort(classes.begin(), classes.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (static_cast<int>(classes.size()) > top_k) classes.resize(static_cast<std::size_t>(top_k));
  ProposalSet out = set;
  out.proposals.clear();
  for (const auto& p : set.proposals) {
    for (const auto& [label, prob] : classes) {
      ActionInstance q = p;
      q.label = label;
      q.score = score_of(p) * prob;
      out.proposals.push_back(q);
    }
  }
  return out;
}

ProposalSet to_seconds(const ProposalSet& set) {
  if (set.unit == TimeUnit::kSeconds) return set;
  require_unit(TimeUnit::kFeature, set.unit);
  ProposalSet out = set;
  const double sec = set.feature_stride / set.frame_rate;
  for (auto& p : out.proposals) p.interval = {p.interval.start * sec, p.interval.end * sec};
  out.unit = TimeUnit::kSeconds;
  return out;
}

}  // namespace minitad::postproc
