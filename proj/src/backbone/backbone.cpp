#include "minitad/backbone/backbone.hpp"

#include <algorithm>
#include <stdexcept>

namespace minitad::backbone {

namespace {

using ag::Matrix;

// Kernel-3 convolution that never mixes rows across segment boundaries
// (segments are consecutive blocks of `segment` rows).
Tensor segmented_conv(const nn::Conv1d& conv, const Tensor& x, Index segment) {
  const Index n = x.rows();
  Matrix first = Matrix::Ones(n, x.cols());
  Matrix last = Matrix::Ones(n, x.cols());
  for (Index r = 0; r < n; ++r) {
    if (r % segment == 0) first.row(r).setZero();
    if (r % segment == segment - 1) last.row(r).setZero();
  }
  const Tensor prev = ag::mul(ag::shift_rows(x, 1), Tensor::constant(first));
  const Tensor next = ag::mul(ag::shift_rows(x, -1), Tensor::constant(last));
  return ag::add_row(ag::matmul(ag::concat_cols({prev, x, next}), conv.weight), conv.bias);
}

// (N * group) x D -> N x D by averaging consecutive groups of rows.
Tensor average_groups(const Tensor& x, Index group) {
  const Index d = x.cols();
  Matrix pool = Matrix::Zero(group * d, d);
  for (Index g = 0; g < group; ++g) pool.middleRows(g * d, d) = Matrix::Identity(d, d) / static_cast<double>(group);
  return ag::matmul(ag::group_rows(x, group), Tensor::constant(pool));
}

}  // namespace

const char* to_string(BackboneMode m) {
  switch (m) {
    case BackboneMode::kSnippet: return "snippet";
    case BackboneMode::kFrame: return "frame";
    case BackboneMode::kPrecomputed: return "precomputed";
  }
  return "?";
}

BackboneMode parse_backbone_mode(const std::string& name) {
  if (name == "snippet") return BackboneMode::kSnippet;
  if (name == "frame") return BackboneMode::kFrame;
  if (name == "precomputed") return BackboneMode::kPrecomputed;
  throw std::invalid_argument("unknown backbone mode '" + name + "'");
}

int BackboneConfig::effective_snippet_stride() const {
  return snippet_stride > 0 ? snippet_stride : std::max(1, snippet_length / 2);
}

void BackboneConfig::validate() const {
  if (mode == BackboneMode::kPrecomputed && trainable) {
    throw std::invalid_argument("a precomputed backbone cannot be trainable");
  }
  if (mode == BackboneMode::kSnippet && snippet_length < 1) throw std::invalid_argument("snippet_length must be >= 1");
  if (snippet_stride < 0) throw std::invalid_argument("snippet_stride must be non-negative");
  if (temporal_pool_factor < 1) throw std::invalid_argument("temporal_pool_factor must be >= 1");
  if (output_dim < 1 || hidden < 1) throw std::invalid_argument("backbone widths must be positive");
}

Index snippet_count(Index frames, int length, int stride) {
  if (frames < length) return 0;
  return (frames - length) / stride + 1;
}

Backbone::Backbone(const BackboneConfig& config, Index frame_dim, std::uint64_t seed) : config_(config) {
  config_.validate();
  if (config_.mode == BackboneMode::kPrecomputed) return;
  nn::Initializer init(seed);
  conv1_ = nn::Conv1d(params_, "conv1", frame_dim, config_.hidden, init);
  conv2_ = nn::Conv1d(params_, "conv2", config_.hidden, config_.output_dim, init);
}

double Backbone::to_input_position(double encoded) const {
  switch (config_.mode) {
    case BackboneMode::kSnippet: {
      const double stride = config_.effective_snippet_stride();
      return encoded * stride + 0.5 * (config_.snippet_length - stride);
    }
    case BackboneMode::kFrame: return encoded * config_.temporal_pool_factor;
    case BackboneMode::kPrecomputed: break;
  }
  return encoded;
}

double Backbone::from_input_position(double input) const {
  switch (config_.mode) {
    case BackboneMode::kSnippet: {
      const double stride = config_.effective_snippet_stride();
      return (input - 0.5 * (config_.snippet_length - stride)) / stride;
    }
    case BackboneMode::kFrame: return input / config_.temporal_pool_factor;
    case BackboneMode::kPrecomputed: break;
  }
  return input;
}

EncodedSequence Backbone::encode(const Tensor& frames, Index valid, double frame_stride, double frame_rate) const {
  EncodedSequence out;
  switch (config_.mode) {
    case BackboneMode::kPrecomputed:
      out.values = frames.detach();
      out.valid = valid;
      break;
    case BackboneMode::kSnippet:
      out = encode_snippets(frames, valid);
      out.feature_stride = frame_stride * config_.effective_snippet_stride();
      break;
    case BackboneMode::kFrame:
      out = encode_frames(frames, valid);
      out.feature_stride = frame_stride * config_.temporal_pool_factor;
      break;
  }
  if (config_.mode == BackboneMode::kPrecomputed) out.feature_stride = frame_stride;
  out.frame_rate = frame_rate;
  return out;
}

FeatureSequence Backbone::encode(const FeatureSequence& frames) const {
  ag::NoGradGuard guard;
  const EncodedSequence e =
      encode(Tensor::constant(frames.values), frames.valid_length, frames.feature_stride, frames.frame_rate);
  FeatureSequence seq(e.values.value(), e.feature_stride, e.frame_rate);
  seq.valid_length = e.valid;
  return seq;
}

EncodedSequence Backbone::encode_snippets(const Tensor& frames, Index valid) const {
  const int len = config_.snippet_length;
  const int stride = config_.effective_snippet_stride();
  const Index t = frames.rows();
  if (t < len) {
    throw std::invalid_argument("sequence of " + std::to_string(t) + " frames is shorter than one snippet (" +
                                std::to_string(len) + "); pad the input upstream");
  }
  const Index count = snippet_count(t, len, stride);
  std::vector<Index> rows;
  rows.reserve(static_cast<std::size_t>(count * len));
  for (Index j = 0; j < count; ++j) {
    for (int k = 0; k < len; ++k) rows.push_back(j * stride + k);
  }
  const Tensor clean = ag::mask_rows(frames, valid);
  const Tensor stacked = ag::gather_rows(clean, rows);
  const Tensor h = ag::relu(segmented_conv(conv1_, stacked, len));
  const Tensor g = ag::relu(segmented_conv(conv2_, h, len));
  EncodedSequence out;
  out.valid = snippet_count(valid, len, stride);
  out.values = ag::mask_rows(average_groups(g, len), out.valid);
  return out;
}

EncodedSequence Backbone::encode_frames(const Tensor& frames, Index valid) const {
  const int p = config_.temporal_pool_factor;
  if (frames.rows() % p != 0) {
    throw std::invalid_argument("frame count " + std::to_string(frames.rows()) +
                                " is not divisible by the temporal pool factor " + std::to_string(p));
  }
  const Tensor clean = ag::mask_rows(frames, valid);
  const Tensor h = ag::mask_rows(ag::relu(conv1_(clean, valid)), valid);
  const Tensor g = ag::mask_rows(ag::relu(conv2_(h, valid)), valid);
  EncodedSequence out;
  out.valid = (valid + p - 1) / p;
  out.values = ag::mask_rows(p == 1 ? g : average_groups(g, p), out.valid);
  return out;
}

FeatureSequence load_precomputed(const std::string& video_id, const data::FeatureStore& store) {
  return store.get(video_id);
}

}  // namespace minitad::backbone
