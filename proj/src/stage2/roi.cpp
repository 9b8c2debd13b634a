#include "minitad/stage2/roi.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace minitad::stage2 {

const char* to_string(RoiMethod m) {
  switch (m) {
    case RoiMethod::kKeypoint: return "keypoint";
    case RoiMethod::kRoiAlign: return "roialign";
    case RoiMethod::kSgAlign: return "sgalign";
    case RoiMethod::kBoundaryMatching: return "boundary_matching";
  }
  return "?";
}

RoiMethod parse_roi_method(const std::string& name) {
  for (RoiMethod m : all_roi_methods()) {
    if (name == to_string(m)) return m;
  }
  throw std::invalid_argument("unknown roi method '" + name + "'");
}

const std::vector<RoiMethod>& all_roi_methods() {
  static const std::vector<RoiMethod> all{RoiMethod::kKeypoint, RoiMethod::kRoiAlign, RoiMethod::kSgAlign,
                                          RoiMethod::kBoundaryMatching};
  return all;
}

void RoIConfig::validate() const {
  if (samples < 1) throw std::invalid_argument("roi samples must be at least 1");
  if (extension_ratio < 0.0) throw std::invalid_argument("extension_ratio must be non-negative");
  if (bm_max_duration < 0) throw std::invalid_argument("bm_max_duration must be non-negative");
  if (level < 0) throw std::invalid_argument("roi level must be non-negative");
}

ag::LerpTap interpolation_tap(double position, Index valid) {
  if (valid < 1) throw std::invalid_argument("cannot sample an empty sequence");
  const double u = std::clamp(position - 0.5, 0.0, static_cast<double>(valid - 1));
  const auto lo = static_cast<Index>(std::floor(u));
  const Index hi = std::min(lo + 1, valid - 1);
  const double w_hi = u - static_cast<double>(lo);
  return {lo, hi, 1.0 - w_hi, w_hi};
}

std::vector<double> bin_centers(const TimeInterval& interval, int samples) {
  std::vector<double> c(static_cast<std::size_t>(samples));
  const double step = (interval.end - interval.start) / samples;
  for (int k = 0; k < samples; ++k) c[static_cast<std::size_t>(k)] = interval.start + (k + 0.5) * step;
  return c;
}

Tensor sample_positions(const Tensor& features, Index valid, const std::vector<double>& positions) {
  std::vector<ag::LerpTap> taps;
  taps.reserve(positions.size());
  for (double p : positions) taps.push_back(interpolation_tap(p, valid));
  return ag::lerp_rows(features, taps);
}

Tensor roi_align(const Tensor& features, Index valid, const TimeInterval& proposal, int samples) {
  return sample_positions(features, valid, bin_centers(proposal, samples));
}

Tensor roi_keypoint(const Tensor& features, Index valid, const TimeInterval& proposal) {
  return sample_positions(features, valid, {proposal.start, proposal.center(), proposal.end});
}

Tensor sg_align(const Tensor& features, Index valid, const TimeInterval& proposal, int samples,
                const neck::GraphAggregation& graph) {
  return roi_align(graph(features, valid), valid, proposal, samples);
}

bool BoundaryMatchingMap::valid(Index start, Index duration) const {
  return duration >= 1 && duration <= max_duration && start >= 0 && start + duration <= length;
}

Index BoundaryMatchingMap::row(Index start, Index duration) const {
  return ((duration - 1) * length + start) * samples;
}

Matrix BoundaryMatchingMap::entry(Index start, Index duration) const {
  if (duration < 1 || duration > max_duration || start < 0 || start >= length) {
    throw std::out_of_range("boundary-matching index out of range");
  }
  return values.value().middleRows(row(start, duration), samples);
}

Index BoundaryMatchingMap::valid_pairs() const {
  Index n = 0;
  for (Index d = 1; d <= max_duration; ++d) n += std::max<Index>(0, length - d + 1);
  return n;
}

BoundaryMatchingMap boundary_matching(const Tensor& features, Index valid, int samples, Index max_duration) {
  if (samples < 1) throw std::invalid_argument("roi samples must be at least 1");
  BoundaryMatchingMap map;
  map.length = valid;
  map.max_duration = max_duration > 0 ? std::min(max_duration, valid) : valid;
  map.samples = samples;
  std::vector<ag::LerpTap> taps;
  taps.reserve(static_cast<std::size_t>(map.max_duration * valid * samples));
  // Invalid cells read a zero-weight tap so they stay exactly zero.
  const ag::LerpTap zero{0, 0, 0.0, 0.0};
  for (Index d = 1; d <= map.max_duration; ++d) {
    for (Index s = 0; s < valid; ++s) {
      if (s + d > valid) {
        taps.insert(taps.end(), static_cast<std::size_t>(samples), zero);
        continue;
      }
      for (double p : bin_centers({static_cast<double>(s), static_cast<double>(s + d)}, samples)) {
        taps.push_back(interpolation_tap(p, valid));
      }
    }
  }
  map.values = ag::lerp_rows(features, taps);
  return map;
}

BoundaryMatchingMap boundary_matching(const neck::FeaturePyramid& pyramid, const RoIConfig& config) {
  if (pyramid.levels.size() != 1) {
    throw UnsupportedConfiguration("boundary matching needs a single-scale sequence; got " +
                                   std::to_string(pyramid.levels.size()) + " pyramid levels");
  }
  const FeatureSequence& seq = pyramid.levels.front();
  return boundary_matching(Tensor::constant(seq.values), seq.valid_length, config.samples, config.bm_max_duration);
}

Tensor extract_rois(const Tensor& features, Index valid, const std::vector<TimeInterval>& proposals,
                    const RoIConfig& config, const neck::GraphAggregation* graph) {
  const int k = config.rows_per_proposal();
  if (proposals.empty()) return Tensor::constant(Matrix::Zero(0, k * features.cols()));
  std::vector<double> positions;
  positions.reserve(proposals.size() * static_cast<std::size_t>(k));
  for (const auto& p : proposals) {
    switch (config.method) {
      case RoiMethod::kKeypoint:
      case RoiMethod::kRoiAlign: {
        const double ext = config.extension_ratio * p.length();
        const TimeInterval wide{p.start - ext, p.end + ext};
        if (config.method == RoiMethod::kKeypoint) {
          positions.insert(positions.end(), {wide.start, wide.center(), wide.end});
        } else {
          const auto c = bin_centers(wide, k);
          positions.insert(positions.end(), c.begin(), c.end());
        }
        break;
      }
      case RoiMethod::kSgAlign: {
        const auto c = bin_centers(p, k);
        positions.insert(positions.end(), c.begin(), c.end());
        break;
      }
      case RoiMethod::kBoundaryMatching: {
        // The map entry of the nearest integer (start, duration) cell.
        const Index cap = config.bm_max_duration > 0 ? std::min<Index>(config.bm_max_duration, valid) : valid;
        const Index d = std::clamp<Index>(std::llround(p.length()), 1, cap);
        const Index s = std::clamp<Index>(std::llround(p.start), 0, valid - d);
        const auto c = bin_centers({static_cast<double>(s), static_cast<double>(s + d)}, k);
        positions.insert(positions.end(), c.begin(), c.end());
        break;
      }
    }
  }
  Tensor source = features;
  if (config.method == RoiMethod::kSgAlign) {
    if (graph == nullptr) throw std::invalid_argument("sgalign needs a graph aggregation layer");
    source = (*graph)(features, valid);
  }
  return ag::group_rows(sample_positions(source, valid, positions), k);
}

}  // namespace minitad::stage2
