#pragma once

#include "minitad/runner/config.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace minitad::runner {

using ag::Index;
using ag::Tensor;
using ag::Matrix;

/// Independent 64-bit stream for one named component of a run.
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t seed, const std::string& stream);

/// One fixed-length model input cut from a video. Window row q corresponds
/// to source row position q * scale + shift.
struct Sample {
  std::string video_id;
  FeatureSequence input;
  double scale = 1.0;
  double shift = 0.0;
  long offset = 0;  // integer window offset when scale == 1
  std::vector<ActionInstance> gt;  // window coordinates, input rows

  [[nodiscard]] double to_source(double window_position) const { return window_position * scale + shift; }
  [[nodiscard]] double from_source(double source_position) const { return (source_position - shift) / scale; }
};

struct LossParts {
  Tensor total;
  double cls = 0.0;
  double reg = 0.0;
  double aux = 0.0;
  double stage2 = 0.0;
  Index num_positive = 0;
};

/// Intermediate values of one prediction, for inspection.
struct PredictTrace {
  std::vector<ActionInstance> stage1;               // window coordinates, input rows
  std::vector<std::vector<TimeInterval>> stage2;    // per cascade head, RoI-level units
  Index stage2_valid = 0;                           // valid length of the RoI level
};

/// Backbone, neck, dense head and optional Stage 2 assembled from a config.
/// Each component draws its weights from its own seed stream, so toggling
/// Stage 2 leaves the Stage 1 initialisation untouched.
class Detector {
 public:
  Detector(const ExperimentConfig& config, Index input_dim, int num_classes, std::uint64_t seed);

  [[nodiscard]] LossParts loss(const Tensor& input, Index valid, const std::vector<ActionInstance>& gt) const;
  // Proposals in window coordinates (input rows), best first.
  [[nodiscard]] std::vector<ActionInstance> predict(const FeatureSequence& input, bool use_stage2 = true,
                                                    PredictTrace* trace = nullptr) const;

  [[nodiscard]] std::vector<Tensor> trainable_parameters() const;
  [[nodiscard]] const nn::ParameterSet& parameters() const { return all_params_; }
  [[nodiscard]] bool has_stage2() const { return stage2_ != nullptr; }
  [[nodiscard]] const backbone::Backbone& backbone_module() const { return *backbone_; }
  [[nodiscard]] const ExperimentConfig& config() const { return config_; }

  [[nodiscard]] nlohmann::json state_to_json() const;
  void load_state(const nlohmann::json& state);

 private:
  struct Encoded {
    neck::TensorPyramid pyramid;
    heads::DenseHeadOutput head;
    Index valid = 0;
  };
  [[nodiscard]] Encoded run(const Tensor& input, Index valid) const;
  [[nodiscard]] std::vector<ActionInstance> to_encoded(const std::vector<ActionInstance>& gt) const;
  [[nodiscard]] std::vector<ActionInstance> to_input(const std::vector<ActionInstance>& p, double input_valid) const;

  ExperimentConfig config_;
  std::unique_ptr<backbone::Backbone> backbone_;
  std::unique_ptr<neck::Neck> neck_;
  std::unique_ptr<heads::DenseHead> head_;
  std::unique_ptr<stage2::Stage2> stage2_;
  nn::ParameterSet all_params_;
};

}  // namespace minitad::runner
