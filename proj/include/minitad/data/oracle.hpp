#pragma once

#include "minitad/core/feature_sequence.hpp"
#include "minitad/core/types.hpp"

#include <vector>

namespace minitad::data {

/// Reference detector for planted-signature data. A row joins class c when
/// its cosine similarity with signature c is the largest and exceeds
/// `threshold`; maximal runs of equally labelled rows become segments
/// [first, last + 1) in feature units, each scored 1.
std::vector<ActionInstance> correlation_oracle(const FeatureSequence& features, const Eigen::MatrixXd& signatures,
                                               double threshold = 0.5);

}  // namespace minitad::data
