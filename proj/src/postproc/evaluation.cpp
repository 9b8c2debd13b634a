#include "minitad/postproc/evaluation.hpp"

#include "minitad/core/interval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace minitad::postproc {

std::vector<double> thumos_thresholds() { return {0.3, 0.4, 0.5, 0.6, 0.7}; }

std::vector<double> activitynet_thresholds() {
  std::vector<double> t;
  for (int i = 10; i <= 19; ++i) t.push_back(i / 20.0);
  return t;
}

std::vector<double> protocol_thresholds(const std::string& protocol) {
  if (protocol == "thumos") return thumos_thresholds();
  if (protocol == "activitynet") return activitynet_thresholds();
  throw std::invalid_argument("unknown evaluation protocol '" + protocol + "' (expected thumos or activitynet)");
}

void EvalConfig::validate() const {
  if (tiou_thresholds.empty()) throw std::invalid_argument("at least one tIoU threshold required");
  for (std::size_t i = 0; i < tiou_thresholds.size(); ++i) {
    const double t = tiou_thresholds[i];
    if (!(t > 0.0 && t <= 1.0)) throw std::invalid_argument("tIoU thresholds must lie in (0, 1]");
    if (i > 0 && !(t > tiou_thresholds[i - 1])) throw std::invalid_argument("tIoU thresholds must increase");
  }
  if (max_predictions_per_video < 1) throw std::invalid_argument("max_predictions_per_video must be positive");
}

double average_precision(const std::vector<Detection>& predictions,
                         const std::map<std::string, std::vector<TimeInterval>>& ground_truth, double tiou_threshold) {
  std::size_t num_gt = 0;
  std::map<std::string, std::vector<bool>> matched;
  for (const auto& [vid, boxes] : ground_truth) {
    num_gt += boxes.size();
    matched[vid].assign(boxes.size(), false);
  }
  if (num_gt == 0) return 0.0;

  std::vector<std::size_t> order(predictions.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return predictions[a].score > predictions[b].score; });

  std::vector<double> precision, recall;
  precision.reserve(order.size());
  recall.reserve(order.size());
  std::size_t tp = 0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    const Detection& d = predictions[order[rank]];
    const auto it = ground_truth.find(d.video_id);
    if (it != ground_truth.end()) {
      auto& used = matched[d.video_id];
      int best = -1;
      double best_iou = -1.0;
      for (std::size_t g = 0; g < it->second.size(); ++g) {
        if (used[g]) continue;
        const double o = tiou(d.interval, it->second[g]);
        if (o > best_iou) {
          best_iou = o;
          best = static_cast<int>(g);
        }
      }
      if (best >= 0 && best_iou >= tiou_threshold) {
        used[static_cast<std::size_t>(best)] = true;
        ++tp;
      }
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(rank + 1));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(num_gt));
  }

  // Monotone envelope from the right, then sum precision over recall steps.
  for (std::size_t i = precision.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < precision.size(); ++i) {
    if (recall[i] != prev_recall) {
      ap += (recall[i] - prev_recall) * precision[i];
      prev_recall = recall[i];
    }
  }
  return ap;
}

EvalResult mean_average_precision(const std::vector<ProposalSet>& predictions, const data::AnnotationDatabase& db,
                                  const std::vector<std::string>& video_ids, const EvalConfig& config) {
  config.validate();
  const int num_classes = db.label_space.num_classes();
  std::vector<std::map<std::string, std::vector<TimeInterval>>> gt(static_cast<std::size_t>(num_classes));
  std::vector<bool> has_gt(static_cast<std::size_t>(num_classes), false);
  std::map<std::string, bool> evaluated;
  for (const auto& vid : video_ids) {
    evaluated[vid] = true;
    for (const auto& a : db.at(vid).annotations) {
      gt[static_cast<std::size_t>(a.label)][vid].push_back(a.interval);
      has_gt[static_cast<std::size_t>(a.label)] = true;
    }
  }

  std::vector<std::vector<Detection>> dets(static_cast<std::size_t>(num_classes));
  for (const auto& set : predictions) {
    require_unit(TimeUnit::kSeconds, set.unit);
    if (!evaluated.count(set.video_id)) continue;
    std::vector<ActionInstance> kept = set.proposals;
    std::stable_sort(kept.begin(), kept.end(),
                     [](const auto& a, const auto& b) { return a.score.value_or(0.0) > b.score.value_or(0.0); });
    if (kept.size() > static_cast<std::size_t>(config.max_predictions_per_video)) {
      kept.resize(static_cast<std::size_t>(config.max_predictions_per_video));
    }
    for (const auto& p : kept) {
      if (p.label < 0 || p.label >= num_classes) continue;
      dets[static_cast<std::size_t>(p.label)].push_back({set.video_id, p.interval, p.score.value_or(0.0)});
    }
  }

  EvalResult result;
  result.thresholds = config.tiou_thresholds;
  for (int c = 0; c < num_classes; ++c) {
    if (has_gt[static_cast<std::size_t>(c)]) result.classes.push_back(c);
  }
  for (double t : config.tiou_thresholds) {
    double sum = 0.0;
    for (int c : result.classes) {
      sum += average_precision(dets[static_cast<std::size_t>(c)], gt[static_cast<std::size_t>(c)], t);
    }
    result.map.push_back(result.classes.empty() ? 0.0 : sum / static_cast<double>(result.classes.size()));
  }
  result.average = std::accumulate(result.map.begin(), result.map.end(), 0.0) / static_cast<double>(result.map.size());
  return result;
}

std::string SeedStatistics::format(int decimals) const {
  char buf[96];
  if (stddev) {
    std::snprintf(buf, sizeof buf, "%.*f±%.*f", decimals, mean, decimals, *stddev);
  } else {
    std::snprintf(buf, sizeof buf, "%.*f", decimals, mean);
  }
  return buf;
}

SeedStatistics seed_statistics(const std::vector<double>& values) {
  SeedStatistics s;
  s.count = values.size();
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

}  // namespace minitad::postproc
