#pragma once

#include "minitad/core/feature_sequence.hpp"
#include "minitad/data/feature_store.hpp"
#include "minitad/nn/layers.hpp"

#include <cstdint>
#include <string>

namespace minitad::backbone {

using ag::Index;
using ag::Tensor;

enum class BackboneMode { kSnippet, kFrame, kPrecomputed };

[[nodiscard]] const char* to_string(BackboneMode m);
[[nodiscard]] BackboneMode parse_backbone_mode(const std::string& name);

struct BackboneConfig {
  BackboneMode mode = BackboneMode::kPrecomputed;
  int snippet_length = 16;
  int snippet_stride = 0;  // 0: snippet_length / 2
  int temporal_pool_factor = 1;
  int output_dim = 32;
  int hidden = 64;
  bool trainable = false;

  [[nodiscard]] int effective_snippet_stride() const;
  void validate() const;
};

/// Output of an encoder pass: differentiable values plus the valid prefix.
struct EncodedSequence {
  Tensor values;
  Index valid = 0;
  double feature_stride = 1.0;
  double frame_rate = 1.0;
};

/// Two-layer temporal convolution encoder over per-frame vectors.
/// Snippet mode convolves within each snippet only and mean-pools it to one
/// row; frame mode convolves the whole (masked) sequence and average-pools
/// by the temporal factor.
class Backbone {
 public:
  Backbone(const BackboneConfig& config, Index frame_dim, std::uint64_t seed);

  [[nodiscard]] EncodedSequence encode(const Tensor& frames, Index valid, double frame_stride,
                                       double frame_rate) const;
  [[nodiscard]] FeatureSequence encode(const FeatureSequence& frames) const;

  // Position along the input rows of an encoded position (row i of either
  // sequence is centered at i + 0.5), and back.
  [[nodiscard]] double to_input_position(double encoded) const;
  [[nodiscard]] double from_input_position(double input) const;

  [[nodiscard]] const BackboneConfig& config() const { return config_; }
  [[nodiscard]] nn::ParameterSet& parameters() { return params_; }
  [[nodiscard]] const nn::ParameterSet& parameters() const { return params_; }

 private:
  [[nodiscard]] EncodedSequence encode_snippets(const Tensor& frames, Index valid) const;
  [[nodiscard]] EncodedSequence encode_frames(const Tensor& frames, Index valid) const;

  BackboneConfig config_;
  nn::ParameterSet params_;
  nn::Conv1d conv1_, conv2_;
};

/// Number of snippets for a T-frame input.
[[nodiscard]] Index snippet_count(Index frames, int length, int stride);

/// Stored features for `video_id`; never participates in differentiation.
FeatureSequence load_precomputed(const std::string& video_id, const data::FeatureStore& store);

}  // namespace minitad::backbone
