#include "minitad/autograd/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace minitad::ag {

namespace {

Node& parent(Node& self, std::size_t i) { return *self.parents[i]; }

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch (" +
                                std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                " vs " + std::to_string(b.rows()) + "x" +
                                std::to_string(b.cols()) + ")");
  }
}

double stable_softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <typename F, typename DF>
Tensor unary(const Tensor& a, F f, DF df) {
  Matrix out = a.value().unaryExpr(f);
  return make_result(out, {a}, [df](Node& self) {
    Node& x = parent(self, 0);
    Matrix d = x.value.binaryExpr(self.value, df);
    accumulate(x, (self.grad.array() * d.array()).matrix());
  });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: inner dimensions differ (" + std::to_string(a.cols()) +
                                " vs " + std::to_string(b.rows()) + ")");
  }
  return make_result(a.value() * b.value(), {a, b}, [](Node& self) {
    Node& x = parent(self, 0);
    Node& y = parent(self, 1);
    if (x.requires_grad) accumulate(x, self.grad * y.value.transpose());
    if (y.requires_grad) accumulate(y, x.value.transpose() * self.grad);
  });
}

Tensor transpose(const Tensor& a) {
  return make_result(a.value().transpose(), {a},
                     [](Node& self) { accumulate(parent(self, 0), self.grad.transpose()); });
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  return make_result(a.value() + b.value(), {a, b}, [](Node& self) {
    accumulate(parent(self, 0), self.grad);
    accumulate(parent(self, 1), self.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  return make_result(a.value() - b.value(), {a, b}, [](Node& self) {
    accumulate(parent(self, 0), self.grad);
    if (parent(self, 1).requires_grad) accumulate(parent(self, 1), -self.grad);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  return make_result(a.value().cwiseProduct(b.value()), {a, b}, [](Node& self) {
    Node& x = parent(self, 0);
    Node& y = parent(self, 1);
    if (x.requires_grad) accumulate(x, self.grad.cwiseProduct(y.value));
    if (y.requires_grad) accumulate(y, self.grad.cwiseProduct(x.value));
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "div");
  return make_result(a.value().cwiseQuotient(b.value()), {a, b}, [](Node& self) {
    Node& x = parent(self, 0);
    Node& y = parent(self, 1);
    if (x.requires_grad) accumulate(x, self.grad.cwiseQuotient(y.value));
    if (y.requires_grad) {
      accumulate(y, -self.grad.cwiseProduct(x.value).cwiseQuotient(y.value.cwiseProduct(y.value)));
    }
  });
}

Tensor abs(const Tensor& a) {
  return make_result(a.value().cwiseAbs(), {a}, [](Node& self) {
    Node& x = parent(self, 0);
    const Matrix sign = x.value.unaryExpr([](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
    accumulate(x, self.grad.cwiseProduct(sign));
  });
}

Tensor scale(const Tensor& a, double s) {
  return make_result(a.value() * s, {a},
                     [s](Node& self) { accumulate(parent(self, 0), self.grad * s); });
}

Tensor add_scalar(const Tensor& a, double s) {
  return make_result((a.value().array() + s).matrix(), {a},
                     [](Node& self) { accumulate(parent(self, 0), self.grad); });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("add_row: bad row shape");
  Matrix out = a.value().rowwise() + row.value().row(0);
  return make_result(std::move(out), {a, row}, [](Node& self) {
    accumulate(parent(self, 0), self.grad);
    if (parent(self, 1).requires_grad) accumulate(parent(self, 1), self.grad.colwise().sum());
  });
}

Tensor mul_row(const Tensor& a, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("mul_row: bad row shape");
  Matrix out = a.value().array().rowwise() * row.value().row(0).array();
  return make_result(std::move(out), {a, row}, [](Node& self) {
    Node& x = parent(self, 0);
    Node& r = parent(self, 1);
    if (x.requires_grad) {
      Matrix g = self.grad.array().rowwise() * r.value.row(0).array();
      accumulate(x, g);
    }
    if (r.requires_grad) accumulate(r, self.grad.cwiseProduct(x.value).colwise().sum());
  });
}

Tensor minimum(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "minimum");
  return make_result(a.value().cwiseMin(b.value()), {a, b}, [](Node& self) {
    Node& x = parent(self, 0);
    Node& y = parent(self, 1);
    Matrix pick_x = (x.value.array() <= y.value.array()).cast<double>().matrix();
    if (x.requires_grad) accumulate(x, self.grad.cwiseProduct(pick_x));
    if (y.requires_grad) accumulate(y, (self.grad.array() * (1.0 - pick_x.array())).matrix());
  });
}

Tensor maximum(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "maximum");
  return make_result(a.value().cwiseMax(b.value()), {a, b}, [](Node& self) {
    Node& x = parent(self, 0);
    Node& y = parent(self, 1);
    Matrix pick_x = (x.value.array() >= y.value.array()).cast<double>().matrix();
    if (x.requires_grad) accumulate(x, self.grad.cwiseProduct(pick_x));
    if (y.requires_grad) accumulate(y, (self.grad.array() * (1.0 - pick_x.array())).matrix());
  });
}

Tensor relu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0 ? x : 0.0; },
               [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Tensor exp(const Tensor& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor softplus(const Tensor& a) {
  return unary(a, stable_softplus, [](double x, double) { return stable_sigmoid(x); });
}

Tensor log_sigmoid(const Tensor& a) {
  return unary(a, [](double x) { return -stable_softplus(-x); },
               [](double x, double) { return stable_sigmoid(-x); });
}

Tensor gelu(const Tensor& a) {
  constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
  return unary(
      a,
      [](double x) { return 0.5 * x * (1.0 + std::tanh(k * (x + 0.044715 * x * x * x))); },
      [](double x, double) {
        const double u = k * (x + 0.044715 * x * x * x);
        const double t = std::tanh(u);
        const double du = k * (1.0 + 3.0 * 0.044715 * x * x);
        return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
      });
}

Tensor silu(const Tensor& a) {
  return unary(a, [](double x) { return x * stable_sigmoid(x); },
               [](double x, double) {
                 const double s = stable_sigmoid(x);
                 return s * (1.0 + x * (1.0 - s));
               });
}

Tensor square(const Tensor& a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor pow_scalar(const Tensor& a, double p) {
  return unary(
      a, [p](double x) { return p == 0.0 ? 1.0 : std::pow(x, p); },
      [p](double x, double) {
        if (p == 0.0) return 0.0;
        if (p == 1.0) return 1.0;
        if (x == 0.0) return 0.0;
        return p * std::pow(x, p - 1.0);
      });
}

Tensor sum(const Tensor& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return make_result(std::move(out), {a}, [](Node& self) {
    Node& x = parent(self, 0);
    accumulate(x, Matrix::Constant(x.value.rows(), x.value.cols(), self.grad(0, 0)));
  });
}

Tensor mean(const Tensor& a) {
  const auto n = static_cast<double>(std::max<Index>(1, a.value().size()));
  return scale(sum(a), 1.0 / n);
}

Tensor row_sum(const Tensor& a) {
  Matrix out = a.value().rowwise().sum();
  return make_result(std::move(out), {a}, [](Node& self) {
    Node& x = parent(self, 0);
    Matrix g = self.grad.replicate(1, x.value.cols());
    accumulate(x, g);
  });
}

Tensor slice_rows(const Tensor& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw std::out_of_range("slice_rows");
  return make_result(a.value().middleRows(start, count), {a}, [start, count](Node& self) {
    Node& x = parent(self, 0);
    Matrix g = Matrix::Zero(x.value.rows(), x.value.cols());
    g.middleRows(start, count) = self.grad;
    accumulate(x, g);
  });
}

Tensor slice_cols(const Tensor& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw std::out_of_range("slice_cols");
  return make_result(a.value().middleCols(start, count), {a}, [start, count](Node& self) {
    Node& x = parent(self, 0);
    Matrix g = Matrix::Zero(x.value.rows(), x.value.cols());
    g.middleCols(start, count) = self.grad;
    accumulate(x, g);
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  Index rows = 0;
  const Index cols = parts.front().cols();
  for (const auto& p : parts) {
    if (p.cols() != cols) throw std::invalid_argument("concat_rows: column mismatch");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<Index> offsets;
  Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    offsets.push_back(r);
    r += p.rows();
  }
  return make_result(std::move(out), parts, [offsets](Node& self) {
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      Node& x = parent(self, i);
      if (x.requires_grad) accumulate(x, self.grad.middleRows(offsets[i], x.value.rows()));
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  Index cols = 0;
  const Index rows = parts.front().rows();
  for (const auto& p : parts) {
    if (p.rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<Index> offsets;
  Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    offsets.push_back(c);
    c += p.cols();
  }
  return make_result(std::move(out), parts, [offsets](Node& self) {
    for (std::size_t i = 0; i < self.parents.size(); ++i) {
      Node& x = parent(self, i);
      if (x.requires_grad) accumulate(x, self.grad.middleCols(offsets[i], x.value.cols()));
    }
  });
}

Tensor gather_rows(const Tensor& a, const std::vector<Index>& rows) {
  Matrix out(static_cast<Index>(rows.size()), a.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= a.rows()) throw std::out_of_range("gather_rows");
    out.row(static_cast<Index>(i)) = a.value().row(rows[i]);
  }
  return make_result(std::move(out), {a}, [rows](Node& self) {
    Node& x = parent(self, 0);
    Matrix g = Matrix::Zero(x.value.rows(), x.value.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) g.row(rows[i]) += self.grad.row(static_cast<Index>(i));
    accumulate(x, g);
  });
}

Tensor shift_rows(const Tensor& a, Index shift) {
  const Index n = a.rows();
  Matrix out = Matrix::Zero(n, a.cols());
  const Index len = std::max<Index>(0, n - std::abs(shift));
  if (len > 0) {
    if (shift >= 0) {
      out.middleRows(shift, len) = a.value().topRows(len);
    } else {
      out.topRows(len) = a.value().middleRows(-shift, len);
    }
  }
  return make_result(std::move(out), {a}, [shift, len](Node& self) {
    Node& x = parent(self, 0);
    Matrix g = Matrix::Zero(x.value.rows(), x.value.cols());
    if (len > 0) {
      if (shift >= 0) {
        g.topRows(len) = self.grad.middleRows(shift, len);
      } else {
        g.middleRows(-shift, len) = self.grad.topRows(len);
      }
    }
    accumulate(x, g);
  });
}

Tensor mask_rows(const Tensor& a, Index valid_rows) {
  const Index n = a.rows();
  const Index keep = std::clamp<Index>(valid_rows, 0, n);
  if (keep == n) return a;
  Matrix out = a.value();
  out.bottomRows(n - keep).setZero();
  return make_result(std::move(out), {a}, [keep](Node& self) {
    Matrix g = self.grad;
    g.bottomRows(g.rows() - keep).setZero();
    accumulate(parent(self, 0), g);
  });
}

Tensor group_rows(const Tensor& a, Index group) {
  if (group <= 0 || a.rows() % group != 0) throw std::invalid_argument("group_rows: bad group size");
  const Index n = a.rows() / group;
  const Index d = a.cols();
  Matrix out(n, group * d);
  for (Index i = 0; i < n; ++i) {
    for (Index k = 0; k < group; ++k) out.block(i, k * d, 1, d) = a.value().row(i * group + k);
  }
  return make_result(std::move(out), {a}, [group, n, d](Node& self) {
    Matrix g(n * group, d);
    for (Index i = 0; i < n; ++i) {
      for (Index k = 0; k < group; ++k) g.row(i * group + k) = self.grad.block(i, k * d, 1, d);
    }
    accumulate(parent(self, 0), g);
  });
}

Tensor flip_rows(const Tensor& a) {
  Matrix out = a.value().colwise().reverse();
  return make_result(std::move(out), {a}, [](Node& self) {
    Matrix g = self.grad.colwise().reverse();
    accumulate(parent(self, 0), g);
  });
}

Tensor layer_norm(const Tensor& a, const Tensor& gamma, const Tensor& beta, double eps) {
  const Index n = a.rows();
  const Index d = a.cols();
  if (gamma.rows() != 1 || gamma.cols() != d || beta.rows() != 1 || beta.cols() != d) {
    throw std::invalid_argument("layer_norm: affine parameters must be 1 x cols");
  }
  Matrix xhat(n, d);
  Eigen::VectorXd rstd(n);
  for (Index i = 0; i < n; ++i) {
    const double mu = a.value().row(i).mean();
    const double var = (a.value().row(i).array() - mu).square().mean();
    rstd(i) = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (a.value().row(i).array() - mu) * rstd(i);
  }
  Matrix out = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() +
               beta.value().row(0).array();
  return make_result(std::move(out), {a, gamma, beta}, [xhat, rstd](Node& self) {
    Node& x = parent(self, 0);
    Node& g = parent(self, 1);
    Node& b = parent(self, 2);
    const Index d = xhat.cols();
    if (x.requires_grad) {
      Matrix dxhat = self.grad.array().rowwise() * g.value.row(0).array();
      Matrix dx(xhat.rows(), d);
      for (Index i = 0; i < xhat.rows(); ++i) {
        const double s1 = dxhat.row(i).sum();
        const double s2 = dxhat.row(i).dot(xhat.row(i));
        dx.row(i) = (rstd(i) / static_cast<double>(d)) *
                    (static_cast<double>(d) * dxhat.row(i).array() - s1 - xhat.row(i).array() * s2);
      }
      accumulate(x, dx);
    }
    if (g.requires_grad) accumulate(g, self.grad.cwiseProduct(xhat).colwise().sum());
    if (b.requires_grad) accumulate(b, self.grad.colwise().sum());
  });
}

Tensor masked_softmax_rows(const Tensor& a, Index valid_cols) {
  const Index n = a.rows();
  const Index m = std::clamp<Index>(valid_cols, 0, a.cols());
  Matrix out = Matrix::Zero(n, a.cols());
  if (m > 0) {
    for (Index i = 0; i < n; ++i) {
      const auto row = a.value().row(i).head(m);
      const double mx = row.maxCoeff();
      Eigen::RowVectorXd e = (row.array() - mx).exp();
      out.row(i).head(m) = e / e.sum();
    }
  }
  return make_result(out, {a}, [](Node& self) {
    Matrix g(self.value.rows(), self.value.cols());
    for (Index i = 0; i < g.rows(); ++i) {
      const double dot = self.grad.row(i).dot(self.value.row(i));
      g.row(i) = self.value.row(i).array() * (self.grad.row(i).array() - dot);
    }
    accumulate(parent(self, 0), g);
  });
}

Tensor lerp_rows(const Tensor& a, const std::vector<LerpTap>& taps) {
  Matrix out(static_cast<Index>(taps.size()), a.cols());
  for (std::size_t r = 0; r < taps.size(); ++r) {
    const auto& t = taps[r];
    if (t.lo < 0 || t.hi < 0 || t.lo >= a.rows() || t.hi >= a.rows()) throw std::out_of_range("lerp_rows");
    out.row(static_cast<Index>(r)) = t.w_lo * a.value().row(t.lo) + t.w_hi * a.value().row(t.hi);
  }
  return make_result(std::move(out), {a}, [taps](Node& self) {
    Node& x = parent(self, 0);
    Matrix g = Matrix::Zero(x.value.rows(), x.value.cols());
    for (std::size_t r = 0; r < taps.size(); ++r) {
      const auto& t = taps[r];
      g.row(t.lo) += t.w_lo * self.grad.row(static_cast<Index>(r));
      g.row(t.hi) += t.w_hi * self.grad.row(static_cast<Index>(r));
    }
    accumulate(x, g);
  });
}

Tensor neighbor_mean(const Tensor& a, const std::vector<std::vector<Index>>& neighbors) {
  if (static_cast<Index>(neighbors.size()) != a.rows()) throw std::invalid_argument("neighbor_mean: one list per row");
  Matrix out = Matrix::Zero(a.rows(), a.cols());
  for (std::size_t t = 0; t < neighbors.size(); ++t) {
    const auto& nb = neighbors[t];
    if (nb.empty()) continue;
    for (Index j : nb) out.row(static_cast<Index>(t)) += a.value().row(j);
    out.row(static_cast<Index>(t)) /= static_cast<double>(nb.size());
  }
  return make_result(std::move(out), {a}, [neighbors](Node& self) {
    Node& x = parent(self, 0);
    Matrix g = Matrix::Zero(x.value.rows(), x.value.cols());
    for (std::size_t t = 0; t < neighbors.size(); ++t) {
      const auto& nb = neighbors[t];
      if (nb.empty()) continue;
      const double w = 1.0 / static_cast<double>(nb.size());
      for (Index j : nb) g.row(j) += w * self.grad.row(static_cast<Index>(t));
    }
    accumulate(x, g);
  });
}

Tensor max_pool_stride2(const Tensor& a, Index valid_rows) {
  const Index n = a.rows();
  const Index d = a.cols();
  const Index out_rows = (n + 1) / 2;
  const Index valid = std::clamp<Index>(valid_rows, 0, n);
  const Index out_valid = (valid + 1) / 2;
  Matrix out = Matrix::Zero(out_rows, d);
  Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic> arg =
      Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic>::Constant(out_rows, d, -1);
  for (Index i = 0; i < out_valid; ++i) {
    const Index lo = std::max<Index>(0, 2 * i - 1);
    const Index hi = std::min<Index>(valid - 1, 2 * i + 1);
    for (Index c = 0; c < d; ++c) {
      Index best = lo;
      for (Index j = lo + 1; j <= hi; ++j) {
        if (a.value()(j, c) > a.value()(best, c)) best = j;
      }
      out(i, c) = a.value()(best, c);
      arg(i, c) = best;
    }
  }
  return make_result(std::move(out), {a}, [arg, n, d](Node& self) {
    Matrix g = Matrix::Zero(n, d);
    for (Index i = 0; i < arg.rows(); ++i) {
      for (Index c = 0; c < d; ++c) {
        if (arg(i, c) >= 0) g(arg(i, c), c) += self.grad(i, c);
      }
    }
    accumulate(parent(self, 0), g);
  });
}

Tensor diag_scan(const Tensor& decay, const Tensor& input, Index valid_rows, bool reverse) {
  check_same_shape(decay, input, "diag_scan");
  const Index n = decay.rows();
  const Index d = decay.cols();
  const Index valid = std::clamp<Index>(valid_rows, 0, n);
  Matrix h = Matrix::Zero(n, d);
  for (Index s = 0; s < valid; ++s) {
    const Index t = reverse ? valid - 1 - s : s;
    if (s == 0) {
      h.row(t) = input.value().row(t);
    } else {
      const Index prev = reverse ? t + 1 : t - 1;
      h.row(t) = decay.value().row(t).cwiseProduct(h.row(prev)) + input.value().row(t);
    }
  }
  return make_result(h, {decay, input}, [valid, reverse](Node& self) {
    Node& a = parent(self, 0);
    Node& b = parent(self, 1);
    const Matrix& h = self.value;
    Matrix da = Matrix::Zero(h.rows(), h.cols());
    Matrix db = Matrix::Zero(h.rows(), h.cols());
    Eigen::RowVectorXd carry = Eigen::RowVectorXd::Zero(h.cols());
    for (Index s = valid - 1; s >= 0; --s) {
      const Index t = reverse ? valid - 1 - s : s;
      Eigen::RowVectorXd dh = self.grad.row(t) + carry;
      db.row(t) = dh;
      if (s > 0) {
        const Index prev = reverse ? t + 1 : t - 1;
        da.row(t) = dh.cwiseProduct(h.row(prev));
      }
      carry = dh.cwiseProduct(a.value.row(t));
    }
    if (a.requires_grad) accumulate(a, da);
    if (b.requires_grad) accumulate(b, db);
  });
}

Tensor lstm_recurrence(const Tensor& input_gates, const Tensor& recurrent, Index valid_rows,
                       bool reverse) {
  const Index n = input_gates.rows();
  const Index hsz = recurrent.rows();
  if (input_gates.cols() != 4 * hsz || recurrent.cols() != 4 * hsz) {
    throw std::invalid_argument("lstm_recurrence: expected T x 4H gates and H x 4H weights");
  }
  const Index valid = std::clamp<Index>(valid_rows, 0, n);
  Matrix gates(n, 4 * hsz);  // post-activation i, f, g, o
  Matrix cell = Matrix::Zero(n, hsz);
  Matrix h = Matrix::Zero(n, hsz);
  Eigen::RowVectorXd h_prev = Eigen::RowVectorXd::Zero(hsz);
  Eigen::RowVectorXd c_prev = Eigen::RowVectorXd::Zero(hsz);
  for (Index s = 0; s < valid; ++s) {
    const Index t = reverse ? valid - 1 - s : s;
    Eigen::RowVectorXd z = input_gates.value().row(t) + h_prev * recurrent.value();
    for (Index k = 0; k < 4 * hsz; ++k) {
      gates(t, k) = (k >= 2 * hsz && k < 3 * hsz) ? std::tanh(z(k)) : stable_sigmoid(z(k));
    }
    const auto i = gates.row(t).segment(0, hsz).array();
    const auto f = gates.row(t).segment(hsz, hsz).array();
    const auto g = gates.row(t).segment(2 * hsz, hsz).array();
    const auto o = gates.row(t).segment(3 * hsz, hsz).array();
    cell.row(t) = (f * c_prev.array() + i * g).matrix();
    h.row(t) = (o * cell.row(t).array().tanh()).matrix();
    h_prev = h.row(t);
    c_prev = cell.row(t);
  }
  return make_result(h, {input_gates, recurrent}, [gates, cell, valid, reverse, hsz](Node& self) {
    Node& xg = parent(self, 0);
    Node& wh = parent(self, 1);
    const Matrix& h = self.value;
    Matrix dxg = Matrix::Zero(gates.rows(), 4 * hsz);
    Matrix dwh = Matrix::Zero(hsz, 4 * hsz);
    Eigen::RowVectorXd dh_next = Eigen::RowVectorXd::Zero(hsz);
    Eigen::RowVectorXd dc_next = Eigen::RowVectorXd::Zero(hsz);
    for (Index s = valid - 1; s >= 0; --s) {
      const Index t = reverse ? valid - 1 - s : s;
      const bool first = s == 0;
      const Index prev = reverse ? t + 1 : t - 1;
      Eigen::RowVectorXd c_prev = first ? Eigen::RowVectorXd::Zero(hsz) : Eigen::RowVectorXd(cell.row(prev));
      Eigen::RowVectorXd h_prev = first ? Eigen::RowVectorXd::Zero(hsz) : Eigen::RowVectorXd(h.row(prev));
      const Eigen::ArrayXXd i = gates.row(t).segment(0, hsz).array();
      const Eigen::ArrayXXd f = gates.row(t).segment(hsz, hsz).array();
      const Eigen::ArrayXXd g = gates.row(t).segment(2 * hsz, hsz).array();
      const Eigen::ArrayXXd o = gates.row(t).segment(3 * hsz, hsz).array();
      const Eigen::ArrayXXd tc = cell.row(t).array().tanh();
      const Eigen::ArrayXXd dh = (self.grad.row(t) + dh_next).array();
      const Eigen::ArrayXXd dc = dc_next.array() + dh * o * (1.0 - tc * tc);
      Eigen::RowVectorXd dz(4 * hsz);
      dz.segment(0, hsz) = (dc * g * i * (1.0 - i)).matrix();
      dz.segment(hsz, hsz) = (dc * c_prev.array() * f * (1.0 - f)).matrix();
      dz.segment(2 * hsz, hsz) = (dc * i * (1.0 - g * g)).matrix();
      dz.segment(3 * hsz, hsz) = (dh * tc * o * (1.0 - o)).matrix();
      dxg.row(t) = dz;
      dwh += h_prev.transpose() * dz;
      dh_next = dz * wh.value.transpose();
      dc_next = (dc * f).matrix();
    }
    if (xg.requires_grad) accumulate(xg, dxg);
    if (wh.requires_grad) accumulate(wh, dwh);
  });
}

}  // namespace minitad::ag
