#pragma once

#include "minitad/nn/layers.hpp"

#include <memory>
#include <string>
#include <vector>

namespace minitad::neck {

using ag::Index;
using ag::Tensor;

/// The time-mixing operator hosted inside a macro block.
enum class SequentialKind { kConv, kGraphConv, kSelfAttention, kLstm, kSsm };

[[nodiscard]] const char* to_string(SequentialKind kind);
[[nodiscard]] SequentialKind parse_sequential_kind(const std::string& name);
[[nodiscard]] const std::vector<SequentialKind>& all_sequential_kinds();

struct SequentialOptions {
  Index width = 64;
  int heads = 4;
  int graph_k = 8;
  // Zero the final projection so the module outputs zeros at initialisation.
  bool zero_init_output = false;
};

/// Shape-preserving T x D' -> T x D' map. Rows at or past `valid` are zero in
/// the output and never influence valid rows.
class SequentialModule {
 public:
  virtual ~SequentialModule() = default;
  [[nodiscard]] virtual Tensor forward(const Tensor& x, Index valid) const = 0;
  [[nodiscard]] virtual SequentialKind kind() const = 0;
};

std::unique_ptr<SequentialModule> make_sequential(SequentialKind kind, nn::ParameterSet& params,
                                                  const std::string& name, const SequentialOptions& opts,
                                                  nn::Initializer& init);

/// Neighbour lists: the k nearest valid rows in feature space (Euclidean,
/// ties by index, self excluded) plus the temporal neighbours t-1 and t+1.
std::vector<std::vector<Index>> graph_neighbors(const ag::Matrix& x, Index valid, int k);

/// One graph aggregation step: x W_self + mean_{neighbours}(x) W_neighbor + b.
struct GraphAggregation {
  Tensor self_weight;
  Tensor neighbor_weight;
  Tensor bias;
  int k = 8;

  GraphAggregation() = default;
  GraphAggregation(nn::ParameterSet& params, const std::string& name, Index width, int k, nn::Initializer& init);
  [[nodiscard]] Tensor operator()(const Tensor& x, Index valid) const;
};

// Concrete modules are exposed so tests can reach their weights.

class ConvModule final : public SequentialModule {
 public:
  ConvModule(nn::ParameterSet& params, const std::string& name, const SequentialOptions& opts, nn::Initializer& init);
  [[nodiscard]] Tensor forward(const Tensor& x, Index valid) const override;
  [[nodiscard]] SequentialKind kind() const override { return SequentialKind::kConv; }

  nn::DepthwiseConv1d conv;
  nn::Linear out;
};

class GraphConvModule final : public SequentialModule {
 public:
  GraphConvModule(nn::ParameterSet& params, const std::string& name, const SequentialOptions& opts,
                  nn::Initializer& init);
  [[nodiscard]] Tensor forward(const Tensor& x, Index valid) const override;
  [[nodiscard]] SequentialKind kind() const override { return SequentialKind::kGraphConv; }

  GraphAggregation graph;
  nn::Linear out;
};

class SelfAttentionModule final : public SequentialModule {
 public:
  SelfAttentionModule(nn::ParameterSet& params, const std::string& name, const SequentialOptions& opts,
                      nn::Initializer& init);
  [[nodiscard]] Tensor forward(const Tensor& x, Index valid) const override;
  [[nodiscard]] SequentialKind kind() const override { return SequentialKind::kSelfAttention; }

  int heads;
  nn::Linear query, key, value, out;
};

/// Bidirectional LSTM with D'/2 hidden units per direction.
class LstmModule final : public SequentialModule {
 public:
  LstmModule(nn::ParameterSet& params, const std::string& name, const SequentialOptions& opts, nn::Initializer& init);
  [[nodiscard]] Tensor forward(const Tensor& x, Index valid) const override;
  [[nodiscard]] SequentialKind kind() const override { return SequentialKind::kLstm; }

  nn::Linear input_fwd, input_bwd;
  Tensor recurrent_fwd, recurrent_bwd;
  nn::Linear out;
};

/// Diagonal selective scan: per-channel decay a_t = sigmoid(x W_a + b_a),
/// state h_t = a_t h_{t-1} + (1 - a_t) (x W_u)_t, run forward and on the
/// flipped sequence, summed, then projected.
class SsmModule final : public SequentialModule {
 public:
  SsmModule(nn::ParameterSet& params, const std::string& name, const SequentialOptions& opts, nn::Initializer& init);
  [[nodiscard]] Tensor forward(const Tensor& x, Index valid) const override;
  [[nodiscard]] SequentialKind kind() const override { return SequentialKind::kSsm; }

  nn::Linear input;
  nn::Linear decay;
  nn::Linear out;
};

}  // namespace minitad::neck
