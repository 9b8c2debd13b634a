#pragma once

#include "minitad/nn/layers.hpp"

#include <vector>

namespace minitad::runner {

/// Adam with decoupled weight decay. Decay skips 1-row parameters (biases,
/// norm gains).
class AdamW {
 public:
  AdamW(std::vector<ag::Tensor> params, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
        double eps = 1e-8);

  void step(double lr);
  void zero_grad();
  [[nodiscard]] long steps() const { return t_; }

 private:
  std::vector<ag::Tensor> params_;
  std::vector<ag::Matrix> m_, v_;
  double weight_decay_, beta1_, beta2_, eps_;
  long t_ = 0;
};

/// Linear warmup from 0 to `base_lr` over `warmup_steps`, then cosine decay to 0.
double warmup_cosine_lr(double base_lr, long step, long warmup_steps, long total_steps);

/// Rescales gradients so their global L2 norm is at most `max_norm`;
/// returns the norm before clipping.
double clip_grad_norm(const std::vector<ag::Tensor>& params, double max_norm);

}  // namespace minitad::runner
