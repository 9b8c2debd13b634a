#pragma once

#include "minitad/postproc/evaluation.hpp"
#include "minitad/runner/model.hpp"

#include <optional>
#include <random>
#include <string>
#include <vector>

namespace minitad::runner {

struct Dataset {
  data::AnnotationDatabase database;
  data::FeatureStore features;
  std::optional<Eigen::MatrixXd> signatures;  // synthetic data only
  std::vector<std::string> train_ids;
  std::vector<std::string> eval_ids;

  [[nodiscard]] int num_classes() const { return static_cast<int>(database.label_space.class_names.size()); }
  [[nodiscard]] Index feature_dim() const;
};

[[nodiscard]] Dataset load_dataset(const DatasetConfig& config);

/// Ground truth of one video in feature rows of `features`.
[[nodiscard]] std::vector<ActionInstance> annotations_in_rows(const VideoRecord& video, const FeatureSequence& features);

/// Training views of one video under the configured temporal mapping.
[[nodiscard]] std::vector<Sample> training_samples(const std::string& video_id, const FeatureSequence& features,
                                                   const std::vector<ActionInstance>& gt_rows,
                                                   const data::TemporalMappingConfig& mapping, std::mt19937_64& rng);

/// Deterministic inference views covering the whole video.
[[nodiscard]] std::vector<Sample> inference_samples(const std::string& video_id, const FeatureSequence& features,
                                                    const data::TemporalMappingConfig& mapping);

/// Per-window predictions merged into one seconds-unit set: windows are
/// aggregated first, then optionally fused with external class scores, then
/// suppressed and capped per video.
[[nodiscard]] postproc::ProposalSet merge_windows(const std::vector<Sample>& windows,
                                                  const std::vector<std::vector<ActionInstance>>& predictions,
                                                  const FeatureSequence& features, const PostprocessConfig& config,
                                                  const postproc::ExternalScores* external = nullptr);

/// Runs inference over `video_ids` and returns seconds-unit detections.
[[nodiscard]] std::vector<postproc::ProposalSet> detect(const Detector& model, const Dataset& data,
                                                        const std::vector<std::string>& video_ids,
                                                        const ExperimentConfig& config, bool use_stage2 = true);

/// Scores seconds-unit detections against the dataset. Binary-mode sets
/// without external classifier scores are scored class-agnostically.
[[nodiscard]] postproc::EvalResult evaluate_detections(const std::vector<postproc::ProposalSet>& detections,
                                                       const Dataset& data, const std::vector<std::string>& video_ids,
                                                       const ExperimentConfig& config);

/// Correlation-oracle detections for synthetic data, in seconds.
[[nodiscard]] std::vector<postproc::ProposalSet> oracle_detections(const Dataset& data,
                                                                   const std::vector<std::string>& video_ids);

}  // namespace minitad::runner
