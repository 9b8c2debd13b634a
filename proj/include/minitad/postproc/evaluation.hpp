#pragma once

#include "minitad/data/annotations.hpp"
#include "minitad/postproc/suppression.hpp"

#include <optional>
#include <string>
#include <vector>

namespace minitad::postproc {

[[nodiscard]] std::vector<double> thumos_thresholds();       // 0.3 .. 0.7
[[nodiscard]] std::vector<double> activitynet_thresholds();  // 0.5 .. 0.95
// "thumos" or "activitynet".
[[nodiscard]] std::vector<double> protocol_thresholds(const std::string& protocol);

struct EvalConfig {
  std::vector<double> tiou_thresholds = activitynet_thresholds();
  int max_predictions_per_video = 100;

  void validate() const;
};

struct Detection {
  std::string video_id;
  TimeInterval interval;
  double score = 0.0;
};

/// One class. A detection is a true positive when its best-overlapping
/// still-unmatched ground truth of the same video has tIoU >= threshold.
/// All-point interpolated area under the precision/recall curve.
double average_precision(const std::vector<Detection>& predictions,
                         const std::map<std::string, std::vector<TimeInterval>>& ground_truth, double tiou_threshold);

struct EvalResult {
  std::vector<double> thresholds;
  std::vector<double> map;  // one per threshold
  double average = 0.0;
  std::vector<int> classes;  // classes with ground truth, in label order
};

/// Scores second-unit predictions against the ground truth of `video_ids`.
/// Each video keeps its `max_predictions_per_video` best predictions;
/// classes without ground truth are left out of the mean.
EvalResult mean_average_precision(const std::vector<ProposalSet>& predictions, const data::AnnotationDatabase& db,
                                  const std::vector<std::string>& video_ids, const EvalConfig& config);

struct SeedStatistics {
  double mean = 0.0;
  std::optional<double> stddev;  // sample standard deviation; absent below 2 values
  std::size_t count = 0;

  // "0.50±0.14", or just "0.50" without a deviation.
  [[nodiscard]] std::string format(int decimals = 2) const;
};

SeedStatistics seed_statistics(const std::vector<double>& values);

}  // namespace minitad::postproc
