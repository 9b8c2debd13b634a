#pragma once

#include "minitad/nn/layers.hpp"
#include "minitad/stage2/roi.hpp"

#include <cstdint>
#include <memory>
#include <vector>

namespace minitad::stage2 {

struct Stage2Config {
  bool enabled = false;
  RoIConfig roi;
  int hidden = 128;
  int aux_channels = 0;  // 0, or 1 for a completeness score
  int cascade = 1;       // number of stacked proposal heads
  int train_proposals = 256;
  int test_proposals = 1000;
  double selection_nms = 0.9;
  double positive_tiou = 0.7;
  double loss_weight = 1.0;

  void validate() const;
};

struct ProposalHeadOutput {
  Tensor deltas;        // N x 2 (start, end) in units of proposal length
  Tensor class_logits;  // N x C
  Tensor aux;           // N x X', undefined when X' = 0
};

/// Flattened K x D' RoI features -> MLP -> 2 + C + X' outputs.
class ProposalHead {
 public:
  ProposalHead(nn::ParameterSet& params, const std::string& name, Index in_dim, int hidden, int num_classes,
               int aux_channels, nn::Initializer& init);
  [[nodiscard]] ProposalHeadOutput forward(const Tensor& roi_features) const;

  nn::Linear fc1, fc2, out;
  int num_classes;
  int aux_channels;
};

/// start += ds * length, end += de * length, clamped into [0, upper]; an
/// inverted result collapses to its midpoint.
[[nodiscard]] TimeInterval refine_interval(const TimeInterval& p, double ds, double de, double upper);

/// Geometric mean of all stage probabilities.
[[nodiscard]] double fuse_scores(const std::vector<double>& probabilities);

struct Stage2Targets {
  std::vector<int> label;  // -1 background
  std::vector<TimeInterval> box;
  std::vector<double> best_tiou;
};

/// Positive iff the best tIoU with any ground truth strictly exceeds `threshold`.
Stage2Targets assign_stage2_labels(const std::vector<ActionInstance>& proposals,
                                   const std::vector<ActionInstance>& gt, double threshold = 0.7);

/// Light per-class NMS followed by a top-N cut.
std::vector<ActionInstance> select_proposals(const std::vector<ActionInstance>& stage1, double nms_threshold,
                                             int limit);

struct CascadeResult {
  std::vector<ActionInstance> refined;  // final intervals and fused scores
  std::vector<std::vector<TimeInterval>> per_stage;
};

struct Stage2Loss {
  Tensor total;
  double cls = 0.0;
  double reg = 0.0;
  Index num_positive = 0;
};

/// RoI extraction plus a cascade of proposal heads over one feature level.
class Stage2 {
 public:
  Stage2(const Stage2Config& config, Index feature_dim, int num_classes, std::uint64_t seed);

  // Inference: refine and rescore `proposals` (feature units).
  [[nodiscard]] CascadeResult run(const Tensor& features, Index valid,
                                  const std::vector<ActionInstance>& proposals) const;
  // Training: every head sees the previous head's (detached) refinements.
  [[nodiscard]] Stage2Loss loss(const Tensor& features, Index valid, const std::vector<ActionInstance>& proposals,
                                const std::vector<ActionInstance>& gt) const;

  [[nodiscard]] const Stage2Config& config() const { return config_; }
  [[nodiscard]] nn::ParameterSet& parameters() { return params_; }
  [[nodiscard]] const nn::ParameterSet& parameters() const { return params_; }
  [[nodiscard]] const std::vector<std::unique_ptr<ProposalHead>>& heads() const { return heads_; }
  [[nodiscard]] const neck::GraphAggregation* graph() const { return has_graph_ ? &graph_ : nullptr; }

 private:
  Stage2Config config_;
  nn::ParameterSet params_;
  bool has_graph_ = false;
  neck::GraphAggregation graph_;
  std::vector<std::unique_ptr<ProposalHead>> heads_;
};

}  // namespace minitad::stage2
