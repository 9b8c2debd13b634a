#pragma once

#include "minitad/runner/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace minitad::runner {

struct EpochLog {
  int epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double learning_rate = 0.0;
  std::optional<double> eval_average;
};

struct RunResult {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<double> thresholds;
  std::vector<double> map;
  double average_map = 0.0;
  int best_epoch = 0;
  int epochs = 0;
  double wall_time_seconds = 0.0;
  std::string checkpoint;
  std::string detections;
  std::vector<EpochLog> history;

  // Everything except wall time and paths.
  [[nodiscard]] bool same_metrics(const RunResult& other) const;
};

[[nodiscard]] nlohmann::json to_json(const RunResult& r);
[[nodiscard]] RunResult run_result_from_json(const nlohmann::json& doc);
void save_run_result(const RunResult& r, const std::filesystem::path& path);
[[nodiscard]] RunResult load_run_result(const std::filesystem::path& path);

/// Raised when a loss turns non-finite; the message carries the loss components.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainOptions {
  // Where checkpoint.json, run_result.json and detections.json go; empty
  // keeps everything in memory.
  std::filesystem::path out_dir;
  std::function<void(const EpochLog&)> on_epoch;
};

struct TrainedRun {
  RunResult result;
  std::unique_ptr<Detector> model;  // restored to the best epoch
  std::vector<postproc::ProposalSet> detections;
};

/// Zeroes each input channel with probability `p`; survivors are scaled by
/// 1 / (1 - p) (no scaling at p = 1).
void apply_channel_dropout(Matrix& values, double p, std::mt19937_64& rng);

/// Full training run for one seed, selecting the epoch with the best
/// validation average mAP.
TrainedRun train_run(const ExperimentConfig& config, const Dataset& data, std::uint64_t seed,
                     const TrainOptions& options = {});

/// Checkpoint file: config, seed and every parameter.
void save_checkpoint(const Detector& model, std::uint64_t seed, const std::filesystem::path& path);
[[nodiscard]] std::unique_ptr<Detector> load_checkpoint(const std::filesystem::path& path, const Dataset& data,
                                                        ExperimentConfig* config_out = nullptr);

/// Default artifact root: $MINITAD_CACHE, else ./minitad_cache.
[[nodiscard]] std::filesystem::path cache_root();

}  // namespace minitad::runner
