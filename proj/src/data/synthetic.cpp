#include "minitad/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

namespace minitad::data {

void SyntheticSpec::validate() const {
  if (num_videos < 0) throw std::invalid_argument("num_videos must be non-negative");
  if (feature_dim < 1) throw std::invalid_argument("feature_dim must be positive");
  if (length_range.first < 1 || length_range.second < length_range.first) {
    throw std::invalid_argument("length_range must satisfy 1 <= min <= max");
  }
  if (num_classes < 1) throw std::invalid_argument("num_classes must be positive");
  if (actions_per_video.first < 0 || actions_per_video.second < actions_per_video.first) {
    throw std::invalid_argument("actions_per_video must satisfy 0 <= min <= max");
  }
  if (duration_fraction_range.first <= 0.0 || duration_fraction_range.second > 1.0 ||
      duration_fraction_range.second < duration_fraction_range.first) {
    throw std::invalid_argument("duration_fraction_range must satisfy 0 < min <= max <= 1");
  }
  if (noise_std < 0.0) throw std::invalid_argument("noise_std must be non-negative");
  if (val_fraction < 0.0 || val_fraction > 1.0) throw std::invalid_argument("val_fraction must lie in [0, 1]");
  if (frame_rate <= 0.0 || feature_stride <= 0.0) throw std::invalid_argument("frame_rate and feature_stride must be positive");
}

namespace {

struct Planted {
  int start;
  int end;  // exclusive
  int label;
};

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

double uniform_real(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  SyntheticDataset out;
  out.signatures.resize(spec.num_classes, spec.feature_dim);
  for (int c = 0; c < spec.num_classes; ++c) {
    for (int j = 0; j < spec.feature_dim; ++j) out.signatures(c, j) = normal(rng);
    const double rms = out.signatures.row(c).norm() / std::sqrt(static_cast<double>(spec.feature_dim));
    out.signatures.row(c) /= rms;
  }

  AnnotationDatabase& db = out.database;
  db.version = "synthetic-1";
  for (int c = 0; c < spec.num_classes; ++c) db.label_space.class_names.push_back("class_" + std::to_string(c));

  const int num_val = static_cast<int>(std::lround(spec.val_fraction * spec.num_videos));
  const double sec_per_row = spec.feature_stride / spec.frame_rate;

  for (int v = 0; v < spec.num_videos; ++v) {
    char id_buf[32];
    std::snprintf(id_buf, sizeof(id_buf), "synth_%05d", v);
    const std::string id = id_buf;
    const int length = uniform_int(rng, spec.length_range.first, spec.length_range.second);
    const int wanted = uniform_int(rng, spec.actions_per_video.first, spec.actions_per_video.second);

    std::vector<Planted> planted;
    for (int a = 0; a < wanted; ++a) {
      bool placed = false;
      for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
        const double frac = uniform_real(rng, spec.duration_fraction_range.first, spec.duration_fraction_range.second);
        const int len = std::clamp(static_cast<int>(std::lround(frac * length)), 1, length);
        const int start = uniform_int(rng, 0, length - len);
        const int end = start + len;
        // A one-row gap keeps neighbouring actions separable.
        const bool clash = std::any_of(planted.begin(), planted.end(), [&](const Planted& p) {
          return start <= p.end && p.start <= end;
        });
        if (clash) continue;
        planted.push_back({start, end, uniform_int(rng, 0, spec.num_classes - 1)});
        placed = true;
      }
      if (!placed) {
        throw SyntheticPlacementError("could not place " + std::to_string(wanted) +
                                      " non-overlapping actions in video " + id + " (length " +
                                      std::to_string(length) + ") after 1000 tries; lower actions_per_video");
      }
    }
    std::sort(planted.begin(), planted.end(), [](const Planted& x, const Planted& y) { return x.start < y.start; });

    Eigen::MatrixXd values(length, spec.feature_dim);
    for (int i = 0; i < length; ++i) {
      for (int j = 0; j < spec.feature_dim; ++j) values(i, j) = spec.noise_std * normal(rng);
    }
    VideoRecord rec;
    rec.video_id = id;
    rec.duration = length * sec_per_row;
    rec.frame_count = static_cast<std::size_t>(std::lround(length * spec.feature_stride));
    rec.subset = v >= spec.num_videos - num_val ? Subset::kValidation : Subset::kTraining;
    for (const auto& p : planted) {
      for (int i = p.start; i < p.end; ++i) {
        values.row(i) += spec.class_signature_strength * out.signatures.row(p.label);
      }
      rec.annotations.push_back({{p.start * sec_per_row, p.end * sec_per_row}, p.label, std::nullopt});
    }
    db.videos.emplace(id, std::move(rec));
    out.features.put(id, FeatureSequence(std::move(values), spec.feature_stride, spec.frame_rate));
  }
  return out;
}

}  // namespace minitad::data
