#pragma once

#include <Eigen/Dense>

#include <vector>

namespace minitad {

/// A T' x D sequence of feature rows with a suffix-padding validity mask.
///
/// Row i covers the time span [i, i + 1) in feature units; its center is i + 0.5.
/// `feature_stride` (source frames per row) and `frame_rate` convert feature
/// units to seconds.
struct FeatureSequence {
  Eigen::MatrixXd values;
  Eigen::Index valid_length = 0;
  double feature_stride = 1.0;
  double frame_rate = 1.0;

  FeatureSequence() = default;
  explicit FeatureSequence(Eigen::MatrixXd v, double stride = 1.0, double fps = 1.0)
      : values(std::move(v)), valid_length(values.rows()), feature_stride(stride), frame_rate(fps) {}

  [[nodiscard]] Eigen::Index length() const { return values.rows(); }
  [[nodiscard]] Eigen::Index dim() const { return values.cols(); }
  [[nodiscard]] std::vector<bool> mask() const {
    std::vector<bool> m(static_cast<std::size_t>(length()), false);
    for (Eigen::Index i = 0; i < valid_length; ++i) m[static_cast<std::size_t>(i)] = true;
    return m;
  }
  [[nodiscard]] double seconds_per_feature() const { return feature_stride / frame_rate; }
};

}  // namespace minitad
