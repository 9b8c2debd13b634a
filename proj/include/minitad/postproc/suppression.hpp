#pragma once

#include "minitad/core/types.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace minitad::postproc {

/// Scored detections of one video. `window_offset` is set for sets produced
/// from a sliding window and is expressed in feature rows of the source.
struct ProposalSet {
  std::string video_id;
  std::vector<ActionInstance> proposals;
  TimeUnit unit = TimeUnit::kFeature;
  std::optional<long> window_offset;
  double feature_stride = 1.0;
  double frame_rate = 1.0;
};

/// Greedy hard suppression. A lower-scored proposal is dropped when its tIoU
/// with a kept one exceeds `iou_threshold`. Ties in score resolve by earlier
/// start, then input order.
ProposalSet nms(const ProposalSet& set, double iou_threshold, bool per_class = true);

enum class SoftNmsMethod { kLinear, kGaussian };

[[nodiscard]] const char* to_string(SoftNmsMethod m);
[[nodiscard]] SoftNmsMethod parse_soft_nms_method(const std::string& name);

struct SoftNmsConfig {
  SoftNmsMethod method = SoftNmsMethod::kGaussian;
  double iou_threshold = 0.5;  // linear only
  double sigma = 0.5;          // gaussian only
  double score_floor = 1e-4;
  bool per_class = true;

  void validate() const;
};

/// Iterative score decay. Linear: s (1 - tiou) when tiou > threshold.
/// Gaussian: s exp(-tiou^2 / sigma). Proposals decayed below the floor are
/// dropped. Output is in selection order.
ProposalSet soft_nms(const ProposalSet& set, const SoftNmsConfig& config);

/// Shifts windowed sets back to video coordinates, converts them to seconds
/// and concatenates them. No suppression happens here.
ProposalSet aggregate_windows(const std::vector<ProposalSet>& window_sets);

/// Per video: (class, probability) pairs from an external video classifier.
using ExternalScores = std::map<std::string, std::vector<std::pair<int, double>>>;

class MissingExternalScores : public std::out_of_range {
 public:
  explicit MissingExternalScores(const std::string& video_id);
};

/// Replicates each proposal for the video's `top_k` most probable classes,
/// scoring each copy by proposal score times class probability.
ProposalSet fuse_external_classifier(const ProposalSet& set, const ExternalScores& scores, int top_k);

/// Converts feature-unit proposals to seconds.
ProposalSet to_seconds(const ProposalSet& set);

}  // namespace minitad::postproc
