#include "minitad/autograd/tensor.hpp"

#include <stdexcept>
#include <unordered_set>

namespace minitad::ag {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

// Long recurrent chains would otherwise recurse once per link on destruction.
Node::~Node() {
  std::vector<std::shared_ptr<Node>> pending = std::move(parents);
  while (!pending.empty()) {
    std::shared_ptr<Node> n = std::move(pending.back());
    pending.pop_back();
    if (n && n.use_count() == 1) {
      for (auto& p : n->parents) pending.push_back(std::move(p));
      n->parents.clear();
    }
  }
}

Tensor::Tensor(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Matrix Tensor::grad() const {
  if (node_->grad.size() == 0) return Matrix::Zero(rows(), cols());
  return node_->grad;
}

double Tensor::item() const {
  if (node_->value.size() != 1) throw std::logic_error("item() on a non-scalar tensor");
  return node_->value(0, 0);
}

Tensor make_result(Matrix value, std::vector<Tensor> inputs,
                   std::function<void(Node&)> backward_fn) {
  Tensor out;
  out.node_ = std::make_shared<Node>();
  out.node_->value = std::move(value);
  if (!g_grad_enabled) return out;
  bool any = false;
  for (const auto& t : inputs) any = any || t.requires_grad();
  if (!any) return out;
  out.node_->requires_grad = true;
  out.node_->parents.reserve(inputs.size());
  for (auto& t : inputs) out.node_->parents.push_back(t.node());
  out.node_->backward_fn = std::move(backward_fn);
  return out;
}

void accumulate(Node& parent, const Matrix& g) {
  if (!parent.requires_grad) return;
  if (parent.grad.size() == 0) {
    parent.grad = g;
  } else {
    parent.grad += g;
  }
}

void backward(const Tensor& loss) {
  if (loss.value().size() != 1) throw std::logic_error("backward() needs a scalar loss");
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  Node& root = *loss.node();
  if (root.grad.size() == 0) {
    root.grad = Matrix::Ones(1, 1);
  } else {
    root.grad.array() += 1.0;
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->grad.size() > 0) n->backward_fn(*n);
    // Interior gradients are no longer needed once propagated.
    if (n->backward_fn) n->grad.resize(0, 0);
  }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

}  // namespace minitad::ag
