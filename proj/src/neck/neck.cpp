#include "minitad/neck/neck.hpp"

#include <stdexcept>

namespace minitad::neck {

const char* to_string(MacroBlock block) {
  switch (block) {
    case MacroBlock::kConv: return "conv";
    case MacroBlock::kGcn: return "gcn";
    case MacroBlock::kTransformer: return "transformer";
    case MacroBlock::kMamba: return "mamba";
    case MacroBlock::kMix: return "mix";
  }
  return "unknown";
}

MacroBlock parse_macro_block(const std::string& name) {
  for (MacroBlock b : {MacroBlock::kConv, MacroBlock::kGcn, MacroBlock::kTransformer, MacroBlock::kMamba,
                       MacroBlock::kMix}) {
    if (name == to_string(b)) return b;
  }
  throw std::invalid_argument("unknown macro block '" + name + "'");
}

const char* to_string(Downsample mode) {
  return mode == Downsample::kMaxPool ? "maxpool" : "strided_conv";
}

Downsample parse_downsample(const std::string& name) {
  if (name == "maxpool") return Downsample::kMaxPool;
  if (name == "strided_conv") return Downsample::kStridedConv;
  throw std::invalid_argument("unknown downsample mode '" + name + "'");
}

void NeckConfig::validate() const {
  if (width < 2) throw std::invalid_argument("neck width must be >= 2");
  if (depth < 1) throw std::invalid_argument("neck depth must be >= 1");
  if (pyramid_levels < 1) throw std::invalid_argument("pyramid_levels must be >= 1");
  if (macro_block == MacroBlock::kMix) {
    if (mix.size() != 2) throw std::invalid_argument("mix macro block needs exactly two (macro, sequential) entries");
    for (const auto& c : mix) {
      if (c.macro == MacroBlock::kMix) throw std::invalid_argument("mix entries cannot themselves be mix");
    }
    if (depth % 2 != 0) throw std::invalid_argument("mix macro block needs an even depth");
  }
  const bool uses_attention = macro_block == MacroBlock::kMix
                                  ? (mix[0].sequential == SequentialKind::kSelfAttention ||
                                     mix[1].sequential == SequentialKind::kSelfAttention)
                                  : sequential_module == SequentialKind::kSelfAttention;
  if (uses_attention && (heads < 1 || width % heads != 0)) {
    throw std::invalid_argument("neck width must be divisible by the attention head count");
  }
}

// --- blocks -------------------------------------------------------------

namespace {

SequentialOptions residual_opts(SequentialOptions opts, bool zero) {
  opts.zero_init_output = zero;
  return opts;
}

}  // namespace

ConvBlock::ConvBlock(nn::ParameterSet& params, const std::string& name, SequentialKind kind,
                     const SequentialOptions& opts, nn::Initializer& init)
    : seq(make_sequential(kind, params, name + ".seq", opts, init)) {}

Tensor ConvBlock::forward(const Tensor& x, Index valid) const {
  return ag::mask_rows(ag::add(x, seq->forward(x, valid)), valid);
}

GcnBlock::GcnBlock(nn::ParameterSet& params, const std::string& name, SequentialKind kind,
                   const SequentialOptions& opts, nn::Initializer& init)
    : seq(make_sequential(kind, params, name + ".seq", opts, init)),
      local(params, name + ".local", opts.width, opts.width, init, opts.zero_init_output) {}

Tensor GcnBlock::forward(const Tensor& x, Index valid) const {
  const Tensor branches = ag::add(seq->forward(x, valid), local(x, valid));
  return ag::mask_rows(ag::add(x, branches), valid);
}

TransformerBlock::TransformerBlock(nn::ParameterSet& params, const std::string& name, SequentialKind kind,
                                   const SequentialOptions& opts, nn::Initializer& init)
    : norm1(params, name + ".norm1", opts.width),
      norm2(params, name + ".norm2", opts.width),
      seq(make_sequential(kind, params, name + ".seq", opts, init)),
      fc1(params, name + ".mlp.fc1", opts.width, 2 * opts.width, init),
      fc2(params, name + ".mlp.fc2", 2 * opts.width, opts.width, init, opts.zero_init_output) {}

Tensor TransformerBlock::forward(const Tensor& x, Index valid) const {
  const Tensor y = ag::mask_rows(ag::add(x, seq->forward(norm1(x), valid)), valid);
  const Tensor mlp = fc2(ag::gelu(fc1(norm2(y))));
  return ag::mask_rows(ag::add(y, mlp), valid);
}

MambaBlock::MambaBlock(nn::ParameterSet& params, const std::string& name, SequentialKind kind,
                       const SequentialOptions& opts, nn::Initializer& init)
    : norm(params, name + ".norm", opts.width),
      branch(params, name + ".branch", opts.width, opts.width, init),
      gate(params, name + ".gate", opts.width, opts.width, init),
      seq(make_sequential(kind, params, name + ".seq", residual_opts(opts, false), init)),
      proj(params, name + ".proj", opts.width, opts.width, init, opts.zero_init_output) {}

Tensor MambaBlock::forward(const Tensor& x, Index valid) const {
  const Tensor h = norm(x);
  const Tensor a = ag::mask_rows(ag::silu(branch(h)), valid);
  const Tensor g = ag::silu(gate(h));
  const Tensor mixed = ag::mul(seq->forward(a, valid), g);
  return ag::mask_rows(ag::add(x, proj(mixed)), valid);
}

std::unique_ptr<Block> make_block(const BlockChoice& choice, nn::ParameterSet& params, const std::string& name,
                                  const SequentialOptions& opts, nn::Initializer& init) {
  switch (choice.macro) {
    case MacroBlock::kConv: return std::make_unique<ConvBlock>(params, name, choice.sequential, opts, init);
    case MacroBlock::kGcn: return std::make_unique<GcnBlock>(params, name, choice.sequential, opts, init);
    case MacroBlock::kTransformer:
      return std::make_unique<TransformerBlock>(params, name, choice.sequential, opts, init);
    case MacroBlock::kMamba: return std::make_unique<MambaBlock>(params, name, choice.sequential, opts, init);
    case MacroBlock::kMix: break;
  }
  throw std::invalid_argument("mix is not a concrete block");
}

// --- neck ---------------------------------------------------------------

Neck::Neck(const NeckConfig& config, Index input_dim, std::uint64_t seed) : config_(config) {
  config_.validate();
  nn::Initializer init(seed);
  SequentialOptions opts;
  opts.width = config_.width;
  opts.heads = config_.heads;
  opts.graph_k = config_.graph_k;
  opts.zero_init_output = config_.zero_init_residual;

  project_input_ = input_dim != config_.width;
  if (project_input_) input_proj_ = nn::Linear(params_, "neck.input_proj", input_dim, config_.width, init);

  for (int level = 0; level < config_.pyramid_levels; ++level) {
    const std::string prefix = "neck.level" + std::to_string(level);
    if (level > 0 && config_.downsample == Downsample::kStridedConv) {
      down_convs_.emplace_back(params_, prefix + ".down", config_.width, config_.width, init);
    }
    auto& row = blocks_.emplace_back();
    for (int b = 0; b < config_.depth; ++b) {
      const BlockChoice choice = config_.macro_block == MacroBlock::kMix
                                     ? config_.mix[static_cast<std::size_t>(b % 2)]
                                     : BlockChoice{config_.macro_block, config_.sequential_module};
      row.push_back(make_block(choice, params_, prefix + ".block" + std::to_string(b), opts, init));
    }
  }
}

TensorPyramid Neck::forward(const Tensor& x, Index valid) const {
  if (x.rows() < min_input_length()) {
    throw std::invalid_argument("input of length " + std::to_string(x.rows()) + " is too short for " +
                                std::to_string(config_.pyramid_levels) + " pyramid levels (minimum " +
                                std::to_string(min_input_length()) + " = 2^(L-1))");
  }
  TensorPyramid out;
  Tensor h = ag::mask_rows(project_input_ ? input_proj_(x) : x, valid);
  Index v = valid;
  for (int level = 0; level < config_.pyramid_levels; ++level) {
    if (level > 0) {
      if (config_.downsample == Downsample::kMaxPool) {
        h = ag::max_pool_stride2(h, v);
      } else {
        const Tensor conv = down_convs_[static_cast<std::size_t>(level - 1)](h, v);
        std::vector<Index> even;
        for (Index i = 0; i < h.rows(); i += 2) even.push_back(i);
        h = ag::gather_rows(conv, even);
      }
      v = (v + 1) / 2;
      h = ag::mask_rows(h, v);
    }
    for (const auto& block : blocks_[static_cast<std::size_t>(level)]) h = block->forward(h, v);
    out.levels.push_back(h);
    out.valid.push_back(v);
    out.strides.push_back(1 << level);
  }
  return out;
}

FeaturePyramid to_feature_pyramid(const TensorPyramid& p, double feature_stride, double frame_rate) {
  FeaturePyramid out;
  out.strides = p.strides;
  for (std::size_t l = 0; l < p.levels.size(); ++l) {
    FeatureSequence seq(p.levels[l].value(), feature_stride * p.strides[l], frame_rate);
    seq.valid_length = p.valid[l];
    out.levels.push_back(std::move(seq));
  }
  return out;
}

std::unique_ptr<Neck> build_neck(const NeckConfig& config, Index input_dim, std::uint64_t seed) {
  return std::make_unique<Neck>(config, input_dim, seed);
}

FeaturePyramid forward_pyramid(const Neck& neck, const FeatureSequence& x) {
  ag::NoGradGuard no_grad;
  const TensorPyramid p = neck.forward(Tensor::constant(x.values), x.valid_length);
  return to_feature_pyramid(p, x.feature_stride, x.frame_rate);
}

}  // namespace minitad::neck
