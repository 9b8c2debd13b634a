#pragma once

#include "minitad/core/feature_sequence.hpp"
#include "minitad/neck/sequential.hpp"

#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace minitad::neck {

enum class MacroBlock { kConv, kGcn, kTransformer, kMamba, kMix };
enum class Downsample { kMaxPool, kStridedConv };

[[nodiscard]] const char* to_string(MacroBlock block);
[[nodiscard]] MacroBlock parse_macro_block(const std::string& name);
[[nodiscard]] const char* to_string(Downsample mode);
[[nodiscard]] Downsample parse_downsample(const std::string& name);

struct BlockChoice {
  MacroBlock macro = MacroBlock::kTransformer;
  SequentialKind sequential = SequentialKind::kSelfAttention;
};

struct NeckConfig {
  MacroBlock macro_block = MacroBlock::kTransformer;
  SequentialKind sequential_module = SequentialKind::kSelfAttention;
  // Used when macro_block is kMix: applied alternately, first entry first.
  std::vector<BlockChoice> mix{{MacroBlock::kMamba, SequentialKind::kSsm},
                               {MacroBlock::kTransformer, SequentialKind::kLstm}};
  int width = 64;
  int depth = 2;  // blocks per pyramid level
  int pyramid_levels = 4;
  Downsample downsample = Downsample::kMaxPool;
  int graph_k = 8;
  int heads = 4;
  // Zero every residual branch's output projection (identity at init).
  bool zero_init_residual = false;

  void validate() const;
};

/// Residual macro block; masked rows stay zero.
class Block {
 public:
  virtual ~Block() = default;
  [[nodiscard]] virtual Tensor forward(const Tensor& x, Index valid) const = 0;
};

/// x + Seq(x).
class ConvBlock final : public Block {
 public:
  ConvBlock(nn::ParameterSet& params, const std::string& name, SequentialKind kind, const SequentialOptions& opts,
            nn::Initializer& init);
  [[nodiscard]] Tensor forward(const Tensor& x, Index valid) const override;
  std::unique_ptr<SequentialModule> seq;
};

/// Two-stream residual block: x + Seq(x) + LocalConv(x).
class GcnBlock final : public Block {
 public:
  GcnBlock(nn::ParameterSet& params, const std::string& name, SequentialKind kind, const SequentialOptions& opts,
           nn::Initializer& init);
  [[nodiscard]] Tensor forward(const Tensor& x, Index valid) const override;
  std::unique_ptr<SequentialModule> seq;
  nn::Conv1d local;
};

/// y = x + Seq(LN(x)); out = y + MLP(LN(y)).
class TransformerBlock final : public Block {
 public:
  TransformerBlock(nn::ParameterSet& params, const std::string& name, SequentialKind kind,
                   const SequentialOptions& opts, nn::Initializer& init);
  [[nodiscard]] Tensor forward(const Tensor& x, Index valid) const override;
  nn::LayerNorm norm1, norm2;
  std::unique_ptr<SequentialModule> seq;
  nn::Linear fc1, fc2;
};

/// out = x + Proj(Seq(silu(A LN(x))) * silu(B LN(x))).
class MambaBlock final : public Block {
 public:
  MambaBlock(nn::ParameterSet& params, const std::string& name, SequentialKind kind, const SequentialOptions& opts,
             nn::Initializer& init);
  [[nodiscard]] Tensor forward(const Tensor& x, Index valid) const override;
  nn::LayerNorm norm;
  nn::Linear branch, gate;
  std::unique_ptr<SequentialModule> seq;
  nn::Linear proj;
};

std::unique_ptr<Block> make_block(const BlockChoice& choice, nn::ParameterSet& params, const std::string& name,
                                  const SequentialOptions& opts, nn::Initializer& init);

/// Differentiable multi-resolution features: level l has ceil(T / 2^l) rows.
struct TensorPyramid {
  std::vector<Tensor> levels;
  std::vector<Index> valid;
  std::vector<int> strides;
};

/// Plain-value view of a pyramid.
struct FeaturePyramid {
  std::vector<FeatureSequence> levels;
  std::vector<int> strides;
};

[[nodiscard]] FeaturePyramid to_feature_pyramid(const TensorPyramid& p, double feature_stride, double frame_rate);

class Neck {
 public:
  Neck(const NeckConfig& config, Index input_dim, std::uint64_t seed);

  [[nodiscard]] TensorPyramid forward(const Tensor& x, Index valid) const;
  [[nodiscard]] const NeckConfig& config() const { return config_; }
  [[nodiscard]] nn::ParameterSet& parameters() { return params_; }
  [[nodiscard]] const nn::ParameterSet& parameters() const { return params_; }
  [[nodiscard]] Index min_input_length() const { return Index{1} << (config_.pyramid_levels - 1); }
  [[nodiscard]] const std::vector<std::vector<std::unique_ptr<Block>>>& blocks() const { return blocks_; }

 private:
  NeckConfig config_;
  nn::ParameterSet params_;
  bool project_input_ = false;
  nn::Linear input_proj_;
  std::vector<std::vector<std::unique_ptr<Block>>> blocks_;
  std::vector<nn::Conv1d> down_convs_;
};

/// Config-driven construction; identical configs give identical parameter counts.
std::unique_ptr<Neck> build_neck(const NeckConfig& config, Index input_dim, std::uint64_t seed);

/// Runs the neck on a feature sequence. Throws if the input is shorter than
/// 2^(L-1) rows.
FeaturePyramid forward_pyramid(const Neck& neck, const FeatureSequence& x);

}  // namespace minitad::neck
