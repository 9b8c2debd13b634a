#pragma once

#include "minitad/heads/assignment.hpp"
#include "minitad/heads/losses.hpp"
#include "minitad/neck/neck.hpp"
#include "minitad/nn/layers.hpp"

#include <cstdint>
#include <vector>

namespace minitad::heads {

struct HeadConfig {
  AnchorConfig anchors;
  AssignmentConfig assignment;
  LossConfig loss;
  int num_classes = 5;  // width of the classification branch per anchor
  // Two-way action/background classification; proposals come out class-agnostic.
  bool binary_mode = false;
  int aux_channels = 0;  // 0, or 3 for actionness/startness/endness
  int tower_depth = 2;
  double prior_probability = 0.01;
  double score_threshold = 0.001;
  int pre_nms_topk = 2000;

  void validate(std::size_t levels) const;
};

struct LevelOutput {
  Tensor offsets;       // T x 2A
  Tensor class_logits;  // T x CA
  Tensor aux;           // T x X, undefined when X = 0
  Index valid = 0;
  int stride = 1;
};

struct DenseHeadOutput {
  std::vector<LevelOutput> levels;
};

struct LossBreakdown {
  Tensor total;
  double cls = 0.0;
  double reg = 0.0;
  double aux = 0.0;
  Index num_positive = 0;
};

/// Rows in AnchorSet order (level, anchor, location).
Tensor flatten_class_logits(const DenseHeadOutput& out, int anchors_per_location, int num_classes);
Tensor flatten_offsets(const DenseHeadOutput& out, int anchors_per_location);

struct DecodeOptions {
  ClassificationLoss score_kind = ClassificationLoss::kFocal;
  bool binary_mode = false;
  double score_threshold = 0.001;
  int topk = 2000;
  double upper_bound = 0.0;  // proposals are clamped into [0, upper_bound]
};

/// Scored, class-labelled proposals in input-feature coordinates, best first.
std::vector<ActionInstance> decode_proposals(const DenseHeadOutput& out, const AnchorSet& anchors,
                                             int num_classes, const DecodeOptions& options);

/// Classification, regression and optional auxiliary branches, each a stack
/// of conv + ReLU layers shared by every pyramid level.
class DenseHead {
 public:
  DenseHead(const HeadConfig& config, Index width, std::uint64_t seed);

  [[nodiscard]] DenseHeadOutput forward(const neck::TensorPyramid& pyramid) const;
  [[nodiscard]] AnchorSet anchors(const DenseHeadOutput& out) const;
  // `gt` in input-feature coordinates.
  [[nodiscard]] LossBreakdown loss(const DenseHeadOutput& out, const std::vector<ActionInstance>& gt) const;
  [[nodiscard]] std::vector<ActionInstance> decode(const DenseHeadOutput& out, double upper_bound) const;

  [[nodiscard]] const HeadConfig& config() const { return config_; }
  [[nodiscard]] nn::ParameterSet& parameters() { return params_; }
  [[nodiscard]] const nn::ParameterSet& parameters() const { return params_; }

 private:
  HeadConfig config_;
  nn::ParameterSet params_;
  std::vector<nn::Conv1d> cls_tower_, reg_tower_;
  nn::Conv1d cls_out_, reg_out_, aux_out_;
};

}  // namespace minitad::heads
