#include "minitad/nn/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace minitad::nn {

Tensor ParameterSet::add(const std::string& name, Matrix init) {
  for (const auto& [n, _] : items_) {
    if (n == name) throw std::logic_error("duplicate parameter name '" + name + "'");
  }
  Tensor t = Tensor::parameter(std::move(init));
  items_.emplace_back(name, t);
  return t;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [_, t] : items_) n += static_cast<std::size_t>(t.value().size());
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& [_, t] : items_) t.zero_grad();
}

void ParameterSet::extend(const std::string& prefix, const ParameterSet& other) {
  for (const auto& [n, t] : other.items_) items_.emplace_back(prefix + n, t);
}

Matrix Initializer::uniform(Index rows, Index cols, double bound) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
      m(i, j) = (2.0 * u - 1.0) * bound;
    }
  }
  return m;
}

Matrix Initializer::glorot(Index fan_in, Index fan_out) {
  return uniform(fan_in, fan_out, std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)));
}

Matrix Initializer::normal(Index rows, Index cols, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = dist(rng_);
  }
  return m;
}

Linear::Linear(ParameterSet& params, const std::string& name, Index in, Index out, Initializer& init,
               bool zero_init) {
  // Draw even when zero-initialising so the engine state does not depend on the flag.
  Matrix w = init.glorot(in, out);
  if (zero_init) w.setZero();
  weight = params.add(name + ".weight", std::move(w));
  bias = params.add(name + ".bias", Matrix::Zero(1, out));
}

Tensor Linear::operator()(const Tensor& x) const { return ag::add_row(ag::matmul(x, weight), bias); }

LayerNorm::LayerNorm(ParameterSet& params, const std::string& name, Index dim) {
  gamma = params.add(name + ".gamma", Matrix::Ones(1, dim));
  beta = params.add(name + ".beta", Matrix::Zero(1, dim));
}

Tensor LayerNorm::operator()(const Tensor& x) const { return ag::layer_norm(x, gamma, beta); }

Conv1d::Conv1d(ParameterSet& params, const std::string& name, Index in, Index out, Initializer& init,
               bool zero_init) {
  Matrix w = init.glorot(3 * in, out);
  if (zero_init) w.setZero();
  weight = params.add(name + ".weight", std::move(w));
  bias = params.add(name + ".bias", Matrix::Zero(1, out));
}

Tensor Conv1d::operator()(const Tensor& x, Index valid) const {
  const Tensor xm = ag::mask_rows(x, valid);
  const Tensor taps = ag::concat_cols({ag::shift_rows(xm, 1), xm, ag::shift_rows(xm, -1)});
  return ag::mask_rows(ag::add_row(ag::matmul(taps, weight), bias), valid);
}

DepthwiseConv1d::DepthwiseConv1d(ParameterSet& params, const std::string& name, Index channels,
                                 Initializer& init) {
  weight = params.add(name + ".weight", init.uniform(3, channels, std::sqrt(1.0 / 3.0)));
  bias = params.add(name + ".bias", Matrix::Zero(1, channels));
}

Tensor DepthwiseConv1d::operator()(const Tensor& x, Index valid) const {
  const Tensor xm = ag::mask_rows(x, valid);
  Tensor out = ag::mul_row(ag::shift_rows(xm, 1), ag::slice_rows(weight, 0, 1));
  out = ag::add(out, ag::mul_row(xm, ag::slice_rows(weight, 1, 1)));
  out = ag::add(out, ag::mul_row(ag::shift_rows(xm, -1), ag::slice_rows(weight, 2, 1)));
  return ag::mask_rows(ag::add_row(out, bias), valid);
}

}  // namespace minitad::nn
