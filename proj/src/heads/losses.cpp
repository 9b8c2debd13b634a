#include "minitad/heads/losses.hpp"

#include "minitad/core/interval.hpp"

#include <algorithm>
#include <stdexcept>

namespace minitad::heads {

namespace {

Tensor zero_scalar() { return Tensor::constant(Matrix::Zero(1, 1)); }

Tensor constant_like(const Tensor& a, double v) { return Tensor::constant(Matrix::Constant(a.rows(), a.cols(), v)); }

void require_same_shape(const Tensor& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(what) + ": prediction/target shape mismatch");
  }
}

}  // namespace

const char* to_string(ClassificationLoss k) {
  switch (k) {
    case ClassificationLoss::kFocal: return "focal";
    case ClassificationLoss::kCrossEntropy: return "cross_entropy";
    case ClassificationLoss::kWeightedBce: return "weighted_bce";
    case ClassificationLoss::kBlr: return "blr";
  }
  return "?";
}

ClassificationLoss parse_classification_loss(const std::string& name) {
  for (auto k : all_classification_losses()) {
    if (name == to_string(k)) return k;
  }
  throw std::invalid_argument("unknown classification loss '" + name + "'");
}

const char* to_string(RegressionLoss k) {
  switch (k) {
    case RegressionLoss::kGiou: return "giou";
    case RegressionLoss::kDiou: return "diou";
    case RegressionLoss::kL2: return "l2";
    case RegressionLoss::kSmoothL1: return "smooth_l1";
  }
  return "?";
}

RegressionLoss parse_regression_loss(const std::string& name) {
  for (auto k : all_regression_losses()) {
    if (name == to_string(k)) return k;
  }
  throw std::invalid_argument("unknown regression loss '" + name + "'");
}

const std::vector<ClassificationLoss>& all_classification_losses() {
  static const std::vector<ClassificationLoss> all{ClassificationLoss::kFocal, ClassificationLoss::kCrossEntropy,
                                                   ClassificationLoss::kWeightedBce, ClassificationLoss::kBlr};
  return all;
}

const std::vector<RegressionLoss>& all_regression_losses() {
  static const std::vector<RegressionLoss> all{RegressionLoss::kGiou, RegressionLoss::kDiou, RegressionLoss::kL2,
                                               RegressionLoss::kSmoothL1};
  return all;
}

void LossConfig::validate() const {
  if (focal_alpha < 0.0 || focal_alpha > 1.0) throw std::invalid_argument("focal_alpha must lie in [0, 1]");
  if (focal_gamma < 0.0) throw std::invalid_argument("focal_gamma must be non-negative");
  if (aux_weight < 0.0 || cls_weight < 0.0 || reg_weight < 0.0) {
    throw std::invalid_argument("loss weights must be non-negative");
  }
}

Tensor focal_loss(const Tensor& logits, const Matrix& targets, double alpha, double gamma, double num_positive) {
  require_same_shape(logits, targets, "focal_loss");
  if (logits.rows() == 0) return zero_scalar();
  const Tensor t = Tensor::constant(targets);
  const Tensor not_t = Tensor::constant((1.0 - targets.array()).matrix());
  const Tensor log_p = ag::log_sigmoid(logits);
  const Tensor log_q = ag::log_sigmoid(ag::scale(logits, -1.0));
  Tensor pos_term = ag::mul(t, log_p);
  Tensor neg_term = ag::mul(not_t, log_q);
  if (gamma != 0.0) {
    pos_term = ag::mul(pos_term, ag::pow_scalar(ag::sigmoid(ag::scale(logits, -1.0)), gamma));
    neg_term = ag::mul(neg_term, ag::pow_scalar(ag::sigmoid(logits), gamma));
  }
  const Tensor total = ag::add(ag::scale(pos_term, alpha), ag::scale(neg_term, 1.0 - alpha));
  return ag::scale(ag::sum(total), -1.0 / std::max(1.0, num_positive));
}

Tensor cross_entropy_loss(const Tensor& logits, const std::vector<int>& labels) {
  if (static_cast<ag::Index>(labels.size()) != logits.rows()) {
    throw std::invalid_argument("cross_entropy_loss: one label per row required");
  }
  if (logits.rows() == 0) return zero_scalar();
  const ag::Index n = logits.rows();
  const ag::Index c = logits.cols();
  const Tensor full = ag::concat_cols({logits, Tensor::constant(Matrix::Zero(n, 1))});
  // Shift by the (constant) row max for stability; the shift cancels in the gradient.
  const Eigen::VectorXd row_max = full.value().rowwise().maxCoeff();
  Matrix shift(n, c + 1);
  for (ag::Index j = 0; j <= c; ++j) shift.col(j) = row_max;
  const Tensor shifted = ag::sub(full, Tensor::constant(shift));
  const Tensor lse = ag::log(ag::row_sum(ag::exp(shifted)));
  Matrix one_hot = Matrix::Zero(n, c + 1);
  for (ag::Index i = 0; i < n; ++i) {
    const int l = labels[static_cast<std::size_t>(i)];
    if (l >= c) throw std::invalid_argument("cross_entropy_loss: label out of range");
    one_hot(i, l < 0 ? c : l) = 1.0;
  }
  const Tensor picked = ag::row_sum(ag::mul(shifted, Tensor::constant(one_hot)));
  return ag::mean(ag::sub(lse, picked));
}

Tensor weighted_bce_loss(const Tensor& logits, const Matrix& targets, double pos_weight) {
  require_same_shape(logits, targets, "weighted_bce_loss");
  if (targets.size() == 0) return zero_scalar();
  double w = pos_weight;
  if (w <= 0.0) {
    const double pos = targets.sum();
    const double neg = static_cast<double>(targets.size()) - pos;
    w = pos > 0.0 ? std::max(1.0, neg / pos) : 1.0;
  }
  const Tensor pos_term = ag::mul(Tensor::constant(targets * w), ag::log_sigmoid(logits));
  const Tensor neg_term =
      ag::mul(Tensor::constant((1.0 - targets.array()).matrix()), ag::log_sigmoid(ag::scale(logits, -1.0)));
  return ag::scale(ag::mean(ag::add(pos_term, neg_term)), -1.0);
}

Tensor blr_loss(const Tensor& logits, const Matrix& targets) {
  require_same_shape(logits, targets, "blr_loss");
  if (targets.size() == 0) return zero_scalar();
  const double n = static_cast<double>(targets.size());
  const double pos = targets.sum();
  const double neg = n - pos;
  const double coef_pos = pos > 0.0 ? 0.5 * n / pos : 0.0;
  const double coef_neg = neg > 0.0 ? 0.5 * n / neg : 0.0;
  const Tensor pos_term = ag::mul(Tensor::constant(targets * coef_pos), ag::log_sigmoid(logits));
  const Tensor neg_term = ag::mul(Tensor::constant((1.0 - targets.array()).matrix() * coef_neg),
                                  ag::log_sigmoid(ag::scale(logits, -1.0)));
  return ag::scale(ag::mean(ag::add(pos_term, neg_term)), -1.0);
}

Tensor interval_iou_loss(const Tensor& start, const Tensor& end, const Matrix& target, RegressionLoss kind) {
  if (kind != RegressionLoss::kGiou && kind != RegressionLoss::kDiou) {
    throw std::invalid_argument("interval_iou_loss handles giou and diou only");
  }
  if (target.cols() != 2 || start.rows() != target.rows() || end.rows() != target.rows()) {
    throw std::invalid_argument("interval_iou_loss: shape mismatch");
  }
  if (target.rows() == 0) return zero_scalar();
  const Tensor ts = Tensor::constant(target.col(0));
  const Tensor te = Tensor::constant(target.col(1));
  const Tensor eps = constant_like(start, kDegenerateEps);
  const Tensor inter = ag::relu(ag::sub(ag::minimum(end, te), ag::maximum(start, ts)));
  const Tensor uni = ag::sub(ag::add(ag::sub(end, start), ag::sub(te, ts)), inter);
  const Tensor encl = ag::sub(ag::maximum(end, te), ag::minimum(start, ts));
  const Tensor iou = ag::div(inter, ag::maximum(uni, eps));
  Tensor term;
  if (kind == RegressionLoss::kGiou) {
    term = ag::sub(iou, ag::div(ag::sub(encl, uni), ag::maximum(encl, eps)));
  } else {
    const Tensor dc = ag::scale(ag::sub(ag::add(start, end), ag::add(ts, te)), 0.5);
    term = ag::sub(iou, ag::div(ag::square(dc), ag::maximum(ag::square(encl), eps)));
  }
  return ag::mean(ag::sub(constant_like(term, 1.0), term));
}

Tensor l2_loss(const Tensor& pred, const Matrix& target) {
  require_same_shape(pred, target, "l2_loss");
  if (pred.rows() == 0) return zero_scalar();
  const Tensor diff = ag::sub(pred, Tensor::constant(target));
  return ag::scale(ag::sum(ag::square(diff)), 1.0 / static_cast<double>(pred.rows()));
}

Tensor smooth_l1_loss(const Tensor& pred, const Matrix& target, double beta) {
  require_same_shape(pred, target, "smooth_l1_loss");
  if (pred.rows() == 0) return zero_scalar();
  const Tensor a = ag::abs(ag::sub(pred, Tensor::constant(target)));
  const Tensor m = ag::minimum(a, constant_like(a, beta));
  const Tensor per = ag::add(ag::scale(ag::square(m), 0.5 / beta), ag::sub(a, m));
  return ag::scale(ag::sum(per), 1.0 / static_cast<double>(pred.rows()));
}

}  // namespace minitad::heads
