#pragma once

#include "minitad/autograd/ops.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace minitad::nn {

using ag::Index;
using ag::Matrix;
using ag::Tensor;

/// Ordered, named collection of trainable tensors.
class ParameterSet {
 public:
  Tensor add(const std::string& name, Matrix init);
  [[nodiscard]] const std::vector<std::pair<std::string, Tensor>>& items() const { return items_; }
  [[nodiscard]] std::size_t scalar_count() const;
  void zero_grad();
  // Appends all of `other`'s parameters under `prefix`.
  void extend(const std::string& prefix, const ParameterSet& other);

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
};

/// Deterministic weight initialisation from a seeded engine.
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}
  Matrix uniform(Index rows, Index cols, double bound);
  // Glorot-uniform over (fan_in, fan_out).
  Matrix glorot(Index fan_in, Index fan_out);
  Matrix normal(Index rows, Index cols, double stddev);
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

struct Linear {
  Tensor weight;  // in x out
  Tensor bias;    // 1 x out

  Linear() = default;
  Linear(ParameterSet& params, const std::string& name, Index in, Index out, Initializer& init,
         bool zero_init = false);
  [[nodiscard]] Tensor operator()(const Tensor& x) const;
};

struct LayerNorm {
  Tensor gamma;
  Tensor beta;

  LayerNorm() = default;
  LayerNorm(ParameterSet& params, const std::string& name, Index dim);
  [[nodiscard]] Tensor operator()(const Tensor& x) const;
};

/// Dense kernel-3, stride-1 temporal convolution with zero padding.
/// Inputs are masked to `valid` rows before mixing.
struct Conv1d {
  Tensor weight;  // 3*in x out, taps ordered (t-1, t, t+1)
  Tensor bias;

  Conv1d() = default;
  Conv1d(ParameterSet& params, const std::string& name, Index in, Index out, Initializer& init,
         bool zero_init = false);
  [[nodiscard]] Tensor operator()(const Tensor& x, Index valid) const;
};

/// Per-channel kernel-3 temporal convolution.
struct DepthwiseConv1d {
  Tensor weight;  // 3 x channels
  Tensor bias;

  DepthwiseConv1d() = default;
  DepthwiseConv1d(ParameterSet& params, const std::string& name, Index channels, Initializer& init);
  [[nodiscard]] Tensor operator()(const Tensor& x, Index valid) const;
};

}  // namespace minitad::nn
