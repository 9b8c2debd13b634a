#pragma once

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <vector>

namespace minitad::ag {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

// A node in the reverse-mode graph. Leaves (parameters, constants) have no
// backward function; interior nodes accumulate into their parents' grads.
struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  ~Node();
};

/// Handle to a 2-D double matrix participating in automatic differentiation.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Matrix value, bool requires_grad = false);

  static Tensor constant(Matrix value) { return Tensor(std::move(value), false); }
  static Tensor parameter(Matrix value) { return Tensor(std::move(value), true); }

  [[nodiscard]] bool defined() const { return node_ != nullptr; }
  [[nodiscard]] const Matrix& value() const { return node_->value; }
  [[nodiscard]] Matrix& mutable_value() { return node_->value; }
  [[nodiscard]] bool has_grad() const { return node_->grad.size() > 0; }
  // Zero matrix of the value's shape when no gradient has flowed yet.
  [[nodiscard]] Matrix grad() const;
  [[nodiscard]] bool requires_grad() const { return node_ && node_->requires_grad; }
  [[nodiscard]] Index rows() const { return node_->value.rows(); }
  [[nodiscard]] Index cols() const { return node_->value.cols(); }
  [[nodiscard]] double item() const;
  void zero_grad() { node_->grad.resize(0, 0); }

  // Same value, cut from the graph.
  [[nodiscard]] Tensor detach() const { return Tensor(node_->value, false); }

  [[nodiscard]] const std::shared_ptr<Node>& node() const { return node_; }

 private:
  friend Tensor make_result(Matrix, std::vector<Tensor>, std::function<void(Node&)>);
  std::shared_ptr<Node> node_;
};

// Builds an interior node. The backward function is dropped (and parents are
// not retained) when grad mode is off or no input requires a gradient.
Tensor make_result(Matrix value, std::vector<Tensor> inputs,
                   std::function<void(Node&)> backward_fn);

// Adds `g` into the parent's gradient if it participates in differentiation.
void accumulate(Node& parent, const Matrix& g);

/// Runs reverse-mode differentiation from a 1x1 tensor.
void backward(const Tensor& loss);

[[nodiscard]] bool grad_enabled();

/// Disables graph construction for the lifetime of the guard (thread-local).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

}  // namespace minitad::ag
