#include "minitad/data/oracle.hpp"

#include <stdexcept>

namespace minitad::data {

std::vector<ActionInstance> correlation_oracle(const FeatureSequence& features, const Eigen::MatrixXd& signatures,
                                               double threshold) {
  if (signatures.cols() != features.dim()) {
    throw std::invalid_argument("signature width does not match the feature dimension");
  }
  std::vector<int> label(static_cast<std::size_t>(features.valid_length), -1);
  for (Eigen::Index i = 0; i < features.valid_length; ++i) {
    const double norm = features.values.row(i).norm();
    if (norm == 0.0) continue;
    double best = threshold;
    for (Eigen::Index c = 0; c < signatures.rows(); ++c) {
      const double cosine = features.values.row(i).dot(signatures.row(c)) / (norm * signatures.row(c).norm());
      if (cosine > best) {
        best = cosine;
        label[static_cast<std::size_t>(i)] = static_cast<int>(c);
      }
    }
  }
  std::vector<ActionInstance> out;
  std::size_t i = 0;
  while (i < label.size()) {
    if (label[i] < 0) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < label.size() && label[j] == label[i]) ++j;
    out.push_back({{static_cast<double>(i), static_cast<double>(j)}, label[i], 1.0});
    i = j;
  }
  return out;
}

}  // namespace minitad::data
