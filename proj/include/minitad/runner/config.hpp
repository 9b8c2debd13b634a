#pragma once

#include "minitad/backbone/backbone.hpp"
#include "minitad/data/synthetic.hpp"
#include "minitad/data/temporal_mapping.hpp"
#include "minitad/heads/dense_head.hpp"
#include "minitad/neck/neck.hpp"
#include "minitad/postproc/suppression.hpp"
#include "minitad/stage2/proposal_head.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace minitad::runner {

struct DatasetConfig {
  // Exactly one source: a synthetic spec, or annotation + feature files.
  std::optional<data::SyntheticSpec> synthetic;
  std::string annotations;
  std::string features;  // feature index.json
  data::TemporalMappingConfig mapping;
  bool binary_mode = false;
  std::string train_subset = "training";
  std::string eval_subset = "validation";
};

enum class SuppressionMethod { kSoftNms, kNms, kNone };

[[nodiscard]] const char* to_string(SuppressionMethod m);
[[nodiscard]] SuppressionMethod parse_suppression_method(const std::string& name);

struct PostprocessConfig {
  SuppressionMethod method = SuppressionMethod::kSoftNms;
  postproc::SoftNmsConfig soft_nms;
  double nms_threshold = 0.5;
  std::string protocol = "activitynet";
  std::vector<double> thresholds;  // empty: the protocol's set
  int max_predictions_per_video = 100;
  std::string external_scores;  // optional classifier file
  int external_top_k = 2;

  [[nodiscard]] std::vector<double> effective_thresholds() const;
};

struct TrainConfig {
  int epochs = 30;
  int batch_size = 16;
  double learning_rate = 1e-3;
  int warmup_epochs = 5;
  double weight_decay = 0.05;
  double grad_clip = 1.0;  // global norm; <= 0 disables
  double channel_dropout = 0.0;
  bool longer_epochs = false;
  double longer_epochs_factor = 2.0;
  int eval_every = 1;
  std::vector<std::uint64_t> seeds{0};

  [[nodiscard]] int effective_epochs() const;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  backbone::BackboneConfig backbone;
  neck::NeckConfig neck;
  heads::HeadConfig heads;
  stage2::Stage2Config stage2;
  PostprocessConfig postprocess;
  TrainConfig train;

  void validate() const;
};

/// Schema violations; `problems()` holds one dotted path per offending key.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& summary, std::vector<std::string> problems);
  [[nodiscard]] const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

/// Every key present, key order canonical (sorted).
[[nodiscard]] nlohmann::json config_to_json(const ExperimentConfig& config);
/// Missing keys take defaults; unknown keys are collected and reported together.
[[nodiscard]] ExperimentConfig config_from_json(const nlohmann::json& doc);

// Standalone synthetic spec files use the same keys as dataset.synthetic.
[[nodiscard]] data::SyntheticSpec synthetic_spec_from_json(const nlohmann::json& doc);
[[nodiscard]] nlohmann::json synthetic_spec_to_json(const data::SyntheticSpec& spec);

[[nodiscard]] nlohmann::json yaml_to_json(const std::string& yaml_text);
[[nodiscard]] ExperimentConfig parse_config_yaml(const std::string& yaml_text);
[[nodiscard]] ExperimentConfig load_config(const std::filesystem::path& path);
void save_config(const ExperimentConfig& config, const std::filesystem::path& path);

/// Sets `dotted.path` (which must already exist in the canonical form) to a
/// YAML-typed scalar or flow value.
void apply_override(nlohmann::json& doc, const std::string& dotted_path, const std::string& value);
[[nodiscard]] ExperimentConfig with_override(const ExperimentConfig& config, const std::string& dotted_path,
                                             const std::string& value);

/// FNV-1a over the canonical JSON, seeds excluded; 16 hex digits.
[[nodiscard]] std::string config_hash(const ExperimentConfig& config);

}  // namespace minitad::runner
