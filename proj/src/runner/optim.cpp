#include "minitad/runner/optim.hpp"

#include <algorithm>
#include <cmath>

namespace minitad::runner {

AdamW::AdamW(std::vector<ag::Tensor> params, double weight_decay, double beta1, double beta2, double eps)
    : params_(std::move(params)), weight_decay_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (const auto& p : params_) {
    m_.push_back(ag::Matrix::Zero(p.rows(), p.cols()));
    v_.push_back(ag::Matrix::Zero(p.rows(), p.cols()));
  }
}

void AdamW::step(double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    ag::Tensor& p = params_[k];
    const ag::Matrix g = p.grad();
    m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * g;
    v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * g.cwiseProduct(g);
    ag::Matrix& w = p.mutable_value();
    if (weight_decay_ > 0.0 && w.rows() > 1) w *= 1.0 - lr * weight_decay_;
    w.array() -= lr * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + eps_);
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

double warmup_cosine_lr(double base_lr, long step, long warmup_steps, long total_steps) {
  if (warmup_steps > 0 && step < warmup_steps) {
    return base_lr * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
  }
  const long span = std::max<long>(1, total_steps - warmup_steps);
  const double progress = std::clamp(static_cast<double>(step - warmup_steps) / static_cast<double>(span), 0.0, 1.0);
  return 0.5 * base_lr * (1.0 + std::cos(M_PI * progress));
}

double clip_grad_norm(const std::vector<ag::Tensor>& params, double max_norm) {
  double total = 0.0;
  for (const auto& p : params) total += p.grad().squaredNorm();
  total = std::sqrt(total);
  if (max_norm > 0.0 && total > max_norm) {
    const double scale = max_norm / (total + 1e-12);
    for (const auto& p : params) {
      if (p.has_grad()) p.node()->grad *= scale;
    }
  }
  return total;
}

}  // namespace minitad::runner
