#pragma once

#include "minitad/autograd/ops.hpp"

#include <string>
#include <vector>

namespace minitad::heads {

using ag::Matrix;
using ag::Tensor;

enum class ClassificationLoss { kFocal, kCrossEntropy, kWeightedBce, kBlr };
enum class RegressionLoss { kGiou, kDiou, kL2, kSmoothL1 };

[[nodiscard]] const char* to_string(ClassificationLoss k);
[[nodiscard]] ClassificationLoss parse_classification_loss(const std::string& name);
[[nodiscard]] const char* to_string(RegressionLoss k);
[[nodiscard]] RegressionLoss parse_regression_loss(const std::string& name);
[[nodiscard]] const std::vector<ClassificationLoss>& all_classification_losses();
[[nodiscard]] const std::vector<RegressionLoss>& all_regression_losses();

struct LossConfig {
  ClassificationLoss classification = ClassificationLoss::kFocal;
  double focal_alpha = 0.25;
  double focal_gamma = 2.0;
  // Weighted BCE positive weight; <= 0 balances by the batch's neg/pos ratio.
  double pos_weight = 0.0;
  RegressionLoss regression = RegressionLoss::kDiou;
  double aux_weight = 0.5;
  double cls_weight = 1.0;
  double reg_weight = 1.0;

  void validate() const;
};

// Classification losses take raw logits (rows = samples, cols = classes).
// `targets` is a 0/1 matrix of the same shape; an all-zero row is background.

/// Sigmoid focal loss summed over elements and divided by max(1, num_positive).
Tensor focal_loss(const Tensor& logits, const Matrix& targets, double alpha, double gamma, double num_positive);

/// Softmax over [logits, 0]: the appended zero logit is background.
/// Mean over rows; labels[i] = -1 selects background.
Tensor cross_entropy_loss(const Tensor& logits, const std::vector<int>& labels);

/// Mean over elements of -(w t log p + (1 - t) log(1 - p)).
Tensor weighted_bce_loss(const Tensor& logits, const Matrix& targets, double pos_weight);

/// Class-balanced binary logistic regression: positives weighted by
/// 0.5 N / N_pos and negatives by 0.5 N / N_neg, then averaged.
Tensor blr_loss(const Tensor& logits, const Matrix& targets);

/// Mean of 1 - giou (or 1 - diou) between predicted [start, end] columns
/// (P x 1 each) and target rows (P x 2). Zero for P = 0.
Tensor interval_iou_loss(const Tensor& start, const Tensor& end, const Matrix& target, RegressionLoss kind);

/// Mean over rows of the squared error summed across columns.
Tensor l2_loss(const Tensor& pred, const Matrix& target);

/// Mean over rows of the Huber-style error summed across columns.
Tensor smooth_l1_loss(const Tensor& pred, const Matrix& target, double beta = 1.0);

}  // namespace minitad::heads
