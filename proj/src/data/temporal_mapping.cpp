#include "minitad/data/temporal_mapping.hpp"

#include "minitad/core/interval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace minitad::data {

using Eigen::Index;

const char* to_string(MappingMode mode) {
  switch (mode) {
    case MappingMode::kRescale: return "rescale";
    case MappingMode::kRandomCrop: return "random_crop";
    case MappingMode::kSlidingWindow: return "sliding_window";
  }
  return "unknown";
}

MappingMode parse_mapping_mode(const std::string& name) {
  if (name == "rescale") return MappingMode::kRescale;
  if (name == "random_crop") return MappingMode::kRandomCrop;
  if (name == "sliding_window") return MappingMode::kSlidingWindow;
  throw std::invalid_argument("unknown temporal mapping mode '" + name + "'");
}

void TemporalMappingConfig::validate() const {
  if (target_length < 2) throw std::invalid_argument("target_length must be >= 2");
  for (double r : {train_overlap, test_overlap}) {
    if (r < 0.0 || r >= 1.0) throw std::invalid_argument("window overlap must lie in [0, 1)");
  }
  if (keep_threshold < 0.0 || keep_threshold > 1.0) throw std::invalid_argument("keep_threshold must lie in [0, 1]");
}

FeatureSequence rescale_sequence(const FeatureSequence& features, Index target_length) {
  const Index src = features.valid_length;
  if (src < 1) throw std::invalid_argument("rescale_sequence: empty input");
  if (target_length < 1) throw std::invalid_argument("rescale_sequence: target length must be positive");
  Eigen::MatrixXd out(target_length, features.dim());
  for (Index i = 0; i < target_length; ++i) {
    if (src == 1) {
      out.row(i) = features.values.row(0);
      continue;
    }
    const double pos = target_length == 1
                           ? 0.0
                           : static_cast<double>(i) * static_cast<double>(src - 1) /
                                 static_cast<double>(target_length - 1);
    const Index lo = std::min<Index>(static_cast<Index>(std::floor(pos)), src - 1);
    const Index hi = std::min<Index>(lo + 1, src - 1);
    const double w = pos - static_cast<double>(lo);
    if (w == 0.0) {
      out.row(i) = features.values.row(lo);
    } else {
      out.row(i) = (1.0 - w) * features.values.row(lo) + w * features.values.row(hi);
    }
  }
  FeatureSequence result(std::move(out), features.feature_stride * static_cast<double>(src) /
                                             static_cast<double>(target_length),
                         features.frame_rate);
  return result;
}

FeatureSequence extract_window(const FeatureSequence& features, const WindowSpec& window) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(window.length, features.dim());
  const Index avail = std::clamp<Index>(features.valid_length - window.offset, 0, window.length);
  if (avail > 0) out.topRows(avail) = features.values.middleRows(window.offset, avail);
  FeatureSequence result(std::move(out), features.feature_stride, features.frame_rate);
  result.valid_length = avail;
  return result;
}

std::pair<FeatureSequence, WindowSpec> random_crop(const FeatureSequence& features, Index target_length,
                                                   std::mt19937_64& rng) {
  const Index src = features.valid_length;
  WindowSpec w;
  w.length = target_length;
  if (src <= target_length) {
    w.offset = 0;
    w.pad_length = target_length - src;
  } else {
    const auto span = static_cast<std::uint64_t>(src - target_length + 1);
    w.offset = static_cast<Index>(rng() % span);
    w.pad_length = 0;
  }
  return {extract_window(features, w), w};
}

std::vector<WindowSpec> sliding_windows(Index length, Index target_length, double overlap_ratio) {
  if (overlap_ratio < 0.0 || overlap_ratio >= 1.0) throw std::invalid_argument("overlap_ratio must lie in [0, 1)");
  if (target_length < 1) throw std::invalid_argument("sliding_windows: target length must be positive");
  std::vector<WindowSpec> out;
  if (length <= target_length) {
    out.push_back({"", 0, target_length, target_length - std::max<Index>(length, 0)});
    return out;
  }
  const Index stride = std::max<Index>(
      1, static_cast<Index>(std::llround(static_cast<double>(target_length) * (1.0 - overlap_ratio))));
  Index offset = 0;
  out.push_back({"", offset, target_length, 0});
  while (offset + target_length < length) {
    offset = std::min(offset + stride, length - target_length);
    out.push_back({"", offset, target_length, 0});
  }
  return out;
}

std::vector<ActionInstance> remap_annotations(const std::vector<ActionInstance>& instances,
                                              const WindowSpec& window, double keep_threshold) {
  std::vector<ActionInstance> out;
  const auto offset = static_cast<double>(window.offset);
  const TimeInterval bounds{0.0, static_cast<double>(window.valid_length())};
  for (const auto& inst : instances) {
    const TimeInterval shifted{inst.interval.start - offset, inst.interval.end - offset};
    const TimeInterval clipped = clamp_interval(shifted, bounds);
    const double original = inst.interval.length();
    const double survived = clipped.length();
    if (survived <= 0.0 || survived < keep_threshold * original) continue;
    ActionInstance kept = inst;
    kept.interval = clipped;
    out.push_back(kept);
  }
  return out;
}

}  // namespace minitad::data
