#include "minitad/neck/sequential.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace minitad::neck {

const char* to_string(SequentialKind kind) {
  switch (kind) {
    case SequentialKind::kConv: return "conv";
    case SequentialKind::kGraphConv: return "graphconv";
    case SequentialKind::kSelfAttention: return "selfattn";
    case SequentialKind::kLstm: return "lstm";
    case SequentialKind::kSsm: return "ssm";
  }
  return "unknown";
}

SequentialKind parse_sequential_kind(const std::string& name) {
  for (SequentialKind k : all_sequential_kinds()) {
    if (name == to_string(k)) return k;
  }
  throw std::invalid_argument("unknown sequential module '" + name + "'");
}

const std::vector<SequentialKind>& all_sequential_kinds() {
  static const std::vector<SequentialKind> kinds{SequentialKind::kConv, SequentialKind::kGraphConv,
                                                 SequentialKind::kSelfAttention, SequentialKind::kLstm,
                                                 SequentialKind::kSsm};
  return kinds;
}

std::unique_ptr<SequentialModule> make_sequential(SequentialKind kind, nn::ParameterSet& params,
                                                  const std::string& name, const SequentialOptions& opts,
                                                  nn::Initializer& init) {
  switch (kind) {
    case SequentialKind::kConv: return std::make_unique<ConvModule>(params, name, opts, init);
    case SequentialKind::kGraphConv: return std::make_unique<GraphConvModule>(params, name, opts, init);
    case SequentialKind::kSelfAttention: return std::make_unique<SelfAttentionModule>(params, name, opts, init);
    case SequentialKind::kLstm: return std::make_unique<LstmModule>(params, name, opts, init);
    case SequentialKind::kSsm: return std::make_unique<SsmModule>(params, name, opts, init);
  }
  throw std::invalid_argument("unsupported sequential module");
}

// --- graph --------------------------------------------------------------

std::vector<std::vector<Index>> graph_neighbors(const ag::Matrix& x, Index valid, int k) {
  const Index n = x.rows();
  std::vector<std::vector<Index>> nb(static_cast<std::size_t>(n));
  if (valid <= 0) return nb;
  const auto v = x.topRows(valid);
  const Eigen::VectorXd sq = v.rowwise().squaredNorm();
  const ag::Matrix gram = v * v.transpose();
  std::vector<Index> order(static_cast<std::size_t>(valid));
  for (Index t = 0; t < valid; ++t) {
    auto& list = nb[static_cast<std::size_t>(t)];
    const auto take = static_cast<std::size_t>(std::min<Index>(k, valid - 1));
    if (take > 0) {
      std::iota(order.begin(), order.end(), Index{0});
      std::swap(order[static_cast<std::size_t>(t)], order.back());
      auto dist = [&](Index j) { return sq(t) + sq(j) - 2.0 * gram(t, j); };
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end() - 1,
                        [&](Index a, Index b) {
                          const double da = dist(a);
                          const double db = dist(b);
                          return da < db || (da == db && a < b);
                        });
      list.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take));
    }
    for (Index j : {t - 1, t + 1}) {
      if (j >= 0 && j < valid && std::find(list.begin(), list.end(), j) == list.end()) list.push_back(j);
    }
    std::sort(list.begin(), list.end());
  }
  return nb;
}

GraphAggregation::GraphAggregation(nn::ParameterSet& params, const std::string& name, Index width, int k_,
                                   nn::Initializer& init)
    : k(k_) {
  self_weight = params.add(name + ".self_weight", init.glorot(width, width));
  neighbor_weight = params.add(name + ".neighbor_weight", init.glorot(width, width));
  bias = params.add(name + ".bias", ag::Matrix::Zero(1, width));
}

Tensor GraphAggregation::operator()(const Tensor& x, Index valid) const {
  const Tensor xm = ag::mask_rows(x, valid);
  const Tensor agg = ag::neighbor_mean(xm, graph_neighbors(xm.value(), valid, k));
  Tensor y = ag::add(ag::matmul(xm, self_weight), ag::matmul(agg, neighbor_weight));
  return ag::mask_rows(ag::add_row(y, bias), valid);
}

// --- modules ------------------------------------------------------------

ConvModule::ConvModule(nn::ParameterSet& params, const std::string& name, const SequentialOptions& opts,
                       nn::Initializer& init)
    : conv(params, name + ".dwconv", opts.width, init),
      out(params, name + ".out", opts.width, opts.width, init, opts.zero_init_output) {}

Tensor ConvModule::forward(const Tensor& x, Index valid) const {
  return ag::mask_rows(out(ag::gelu(conv(x, valid))), valid);
}

GraphConvModule::GraphConvModule(nn::ParameterSet& params, const std::string& name,
                                 const SequentialOptions& opts, nn::Initializer& init)
    : graph(params, name + ".graph", opts.width, opts.graph_k, init),
      out(params, name + ".out", opts.width, opts.width, init, opts.zero_init_output) {}

Tensor GraphConvModule::forward(const Tensor& x, Index valid) const {
  return ag::mask_rows(out(ag::gelu(graph(x, valid))), valid);
}

SelfAttentionModule::SelfAttentionModule(nn::ParameterSet& params, const std::string& name,
                                         const SequentialOptions& opts, nn::Initializer& init)
    : heads(opts.heads),
      query(params, name + ".query", opts.width, opts.width, init),
      key(params, name + ".key", opts.width, opts.width, init),
      value(params, name + ".value", opts.width, opts.width, init),
      out(params, name + ".out", opts.width, opts.width, init, opts.zero_init_output) {
  if (heads < 1 || opts.width % heads != 0) {
    throw std::invalid_argument("attention width " + std::to_string(opts.width) + " not divisible by " +
                                std::to_string(heads) + " heads");
  }
}

Tensor SelfAttentionModule::forward(const Tensor& x, Index valid) const {
  const Tensor xm = ag::mask_rows(x, valid);
  const Tensor q = query(xm);
  const Tensor k = key(xm);
  const Tensor v = ag::mask_rows(value(xm), valid);
  const Index dh = x.cols() / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Tensor> per_head;
  per_head.reserve(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    const Tensor qh = ag::slice_cols(q, h * dh, dh);
    const Tensor kh = ag::slice_cols(k, h * dh, dh);
    const Tensor vh = ag::slice_cols(v, h * dh, dh);
    const Tensor scores = ag::scale(ag::matmul(qh, ag::transpose(kh)), scale);
    per_head.push_back(ag::matmul(ag::masked_softmax_rows(scores, valid), vh));
  }
  const Tensor mixed = heads == 1 ? per_head.front() : ag::concat_cols(per_head);
  return ag::mask_rows(out(mixed), valid);
}

namespace {

Tensor lstm_recurrent_init(nn::ParameterSet& params, const std::string& name, Index hidden, nn::Initializer& init) {
  return params.add(name, init.uniform(hidden, 4 * hidden, 1.0 / std::sqrt(static_cast<double>(hidden))));
}

}  // namespace

LstmModule::LstmModule(nn::ParameterSet& params, const std::string& name, const SequentialOptions& opts,
                       nn::Initializer& init) {
  if (opts.width % 2 != 0) throw std::invalid_argument("lstm module needs an even width");
  const Index hidden = opts.width / 2;
  input_fwd = nn::Linear(params, name + ".input_fwd", opts.width, 4 * hidden, init);
  input_bwd = nn::Linear(params, name + ".input_bwd", opts.width, 4 * hidden, init);
  recurrent_fwd = lstm_recurrent_init(params, name + ".recurrent_fwd", hidden, init);
  recurrent_bwd = lstm_recurrent_init(params, name + ".recurrent_bwd", hidden, init);
  // Forget-gate bias starts at 1.
  for (nn::Linear* lin : {&input_fwd, &input_bwd}) lin->bias.mutable_value().middleCols(hidden, hidden).setOnes();
  out = nn::Linear(params, name + ".out", opts.width, opts.width, init, opts.zero_init_output);
}

Tensor LstmModule::forward(const Tensor& x, Index valid) const {
  const Tensor xm = ag::mask_rows(x, valid);
  const Tensor fwd = ag::lstm_recurrence(input_fwd(xm), recurrent_fwd, valid, false);
  const Tensor bwd = ag::lstm_recurrence(input_bwd(xm), recurrent_bwd, valid, true);
  return ag::mask_rows(out(ag::concat_cols({fwd, bwd})), valid);
}

SsmModule::SsmModule(nn::ParameterSet& params, const std::string& name, const SequentialOptions& opts,
                     nn::Initializer& init)
    : input(params, name + ".input", opts.width, opts.width, init),
      decay(params, name + ".decay", opts.width, opts.width, init) {
  // Spread per-channel memory between a ~ 0.5 and a ~ 0.98.
  decay.weight.mutable_value() *= 0.1;
  const Index w = opts.width;
  for (Index c = 0; c < w; ++c) {
    const double a = 0.5 + 0.48 * static_cast<double>(c) / static_cast<double>(std::max<Index>(1, w - 1));
    decay.bias.mutable_value()(0, c) = std::log(a / (1.0 - a));
  }
  out = nn::Linear(params, name + ".out", opts.width, opts.width, init, opts.zero_init_output);
}

Tensor SsmModule::forward(const Tensor& x, Index valid) const {
  const Tensor xm = ag::mask_rows(x, valid);
  const Tensor a = ag::mask_rows(ag::sigmoid(decay(xm)), valid);
  const Tensor u = ag::mask_rows(input(xm), valid);
  const Tensor drive = ag::mul(ag::scale(ag::add_scalar(a, -1.0), -1.0), u);
  const Tensor state = ag::add(ag::diag_scan(a, drive, valid, false), ag::diag_scan(a, drive, valid, true));
  return ag::mask_rows(out(state), valid);
}

}  // namespace minitad::neck
