#include "minitad/heads/anchors.hpp"

#include <cmath>
#include <stdexcept>

namespace minitad::heads {

void AnchorConfig::validate() const {
  for (double l : lengths) {
    if (!(l > 0.0)) throw std::invalid_argument("anchor lengths must be positive");
  }
}

Eigen::VectorXd AnchorLevel::centers() const {
  Eigen::VectorXd c(locations);
  for (Index i = 0; i < locations; ++i) c(i) = center(i);
  return c;
}

Index AnchorSet::total_locations() const {
  Index n = 0;
  for (const auto& l : levels) n += l.locations;
  return n;
}

Index AnchorSet::level_offset(std::size_t level) const {
  Index off = 0;
  for (std::size_t l = 0; l < level; ++l) off += levels[l].locations * per_location;
  return off;
}

AnchorSet generate_anchors(const std::vector<Index>& level_lengths, const std::vector<int>& strides,
                           const AnchorConfig& config) {
  if (level_lengths.size() != strides.size()) throw std::invalid_argument("one stride per level required");
  config.validate();
  AnchorSet set;
  set.anchor_free = config.anchor_free();
  set.per_location = config.per_location();
  for (std::size_t l = 0; l < strides.size(); ++l) {
    AnchorLevel level;
    level.stride = strides[l];
    level.locations = level_lengths[l];
    for (double len : config.lengths) level.anchor_lengths.push_back(config.scale_with_stride ? len * strides[l] : len);
    set.levels.push_back(std::move(level));
  }
  return set;
}

Eigen::Vector2d encode_anchor_free(const TimeInterval& gt, double center, int stride) {
  return {(center - gt.start) / stride, (gt.end - center) / stride};
}

TimeInterval decode_anchor_free(double center, int stride, double d_start, double d_end) {
  return {center - d_start * stride, center + d_end * stride};
}

Eigen::Vector2d encode_anchor_based(const TimeInterval& gt, double center, double anchor_length) {
  if (!(gt.length() > 0.0)) throw std::invalid_argument("anchor-based encoding needs a positive-length target");
  return {(gt.center() - center) / anchor_length, std::log(gt.length() / anchor_length)};
}

TimeInterval decode_anchor_based(double center, double anchor_length, double d_center, double d_log_length) {
  const double c = center + d_center * anchor_length;
  const double half = 0.5 * anchor_length * std::exp(d_log_length);
  return {c - half, c + half};
}

}  // namespace minitad::heads
