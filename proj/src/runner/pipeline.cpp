#include "minitad/runner/pipeline.hpp"

#include "minitad/data/oracle.hpp"
#include "minitad/data/synthetic.hpp"
#include "minitad/postproc/io.hpp"

#include <algorithm>
#include <iostream>
#include <stdexcept>

namespace minitad::runner {

Index Dataset::feature_dim() const {
  const auto ids = features.ids();
  if (ids.empty()) throw std::runtime_error("dataset has no features");
  return features.get(ids.front()).dim();
}

Dataset load_dataset(const DatasetConfig& config) {
  Dataset out;
  if (config.synthetic) {
    data::SyntheticDataset synth = data::generate_synthetic(*config.synthetic);
    out.database = std::move(synth.database);
    out.features = std::move(synth.features);
    out.signatures = std::move(synth.signatures);
  } else {
    auto loaded = data::load_annotations(config.annotations);
    for (const auto& w : loaded.warnings) std::cerr << "warning: " << w << '\n';
    out.database = std::move(loaded.database);
    out.features = data::FeatureStore::load(config.features);
  }
  out.database.label_space.binary_mode = config.binary_mode;

  std::vector<std::string> missing;
  auto pick = [&](const std::string& subset_name) {
    std::vector<std::string> ids = out.database.ids(parse_subset(subset_name));
    for (const auto& id : ids) {
      if (!out.features.contains(id)) missing.push_back(id);
    }
    return ids;
  };
  out.train_ids = pick(config.train_subset);
  out.eval_ids = pick(config.eval_subset);
  if (!missing.empty()) {
    std::string msg = "no features for videos:";
    for (const auto& id : missing) msg += " " + id;
    throw data::FeatureLookupError(msg);
  }
  return out;
}

std::vector<ActionInstance> annotations_in_rows(const VideoRecord& video, const FeatureSequence& features) {
  const double rows_per_second = 1.0 / features.seconds_per_feature();
  std::vector<ActionInstance> out = video.annotations;
  for (auto& a : out) a.interval = {a.interval.start * rows_per_second, a.interval.end * rows_per_second};
  return out;
}

namespace {

Sample rescaled_sample(const std::string& id, const FeatureSequence& features, Index target) {
  Sample s;
  s.video_id = id;
  s.input = data::rescale_sequence(features, target);
  const auto l = static_cast<double>(features.valid_length);
  const auto t = static_cast<double>(target);
  // Output row i samples source row i (L - 1) / (T - 1); centers sit half a row in.
  s.scale = (l > 1.0 && t > 1.0) ? (l - 1.0) / (t - 1.0) : l / t;
  s.shift = 0.5 - 0.5 * s.scale;
  return s;
}

std::vector<ActionInstance> rescale_gt(const Sample& s, const std::vector<ActionInstance>& gt_rows) {
  const double upper = static_cast<double>(s.input.valid_length);
  std::vector<ActionInstance> out;
  for (const auto& g : gt_rows) {
    const double a = std::clamp(s.from_source(g.interval.start), 0.0, upper);
    const double b = std::clamp(s.from_source(g.interval.end), 0.0, upper);
    if (b > a) out.push_back({{a, b}, g.label, g.score});
  }
  return out;
}

Sample window_sample(const std::string& id, const FeatureSequence& features, const data::WindowSpec& w) {
  Sample s;
  s.video_id = id;
  s.input = data::extract_window(features, w);
  s.offset = static_cast<long>(w.offset);
  s.shift = static_cast<double>(w.offset);
  return s;
}

}  // namespace

std::vector<Sample> training_samples(const std::string& video_id, const FeatureSequence& features,
                                     const std::vector<ActionInstance>& gt_rows,
                                     const data::TemporalMappingConfig& mapping, std::mt19937_64& rng) {
  std::vector<Sample> out;
  switch (mapping.mode) {
    case data::MappingMode::kRescale: {
      Sample s = rescaled_sample(video_id, features, mapping.target_length);
      s.gt = rescale_gt(s, gt_rows);
      out.push_back(std::move(s));
      break;
    }
    case data::MappingMode::kRandomCrop: {
      auto [seq, w] = data::random_crop(features, mapping.target_length, rng);
      Sample s;
      s.video_id = video_id;
      s.input = std::move(seq);
      s.offset = static_cast<long>(w.offset);
      s.shift = static_cast<double>(w.offset);
      s.gt = data::remap_annotations(gt_rows, w, mapping.keep_threshold);
      out.push_back(std::move(s));
      break;
    }
    case data::MappingMode::kSlidingWindow: {
      for (const auto& w : data::sliding_windows(features.valid_length, mapping.target_length, mapping.train_overlap)) {
        Sample s = window_sample(video_id, features, w);
        s.gt = data::remap_annotations(gt_rows, w, mapping.keep_threshold);
        out.push_back(std::move(s));
      }
      break;
    }
  }
  return out;
}

std::vector<Sample> inference_samples(const std::string& video_id, const FeatureSequence& features,
                                      const data::TemporalMappingConfig& mapping) {
  if (mapping.mode == data::MappingMode::kRescale) return {rescaled_sample(video_id, features, mapping.target_length)};
  std::vector<Sample> out;
  for (const auto& w : data::sliding_windows(features.valid_length, mapping.target_length, mapping.test_overlap)) {
    out.push_back(window_sample(video_id, features, w));
  }
  return out;
}

postproc::ProposalSet merge_windows(const std::vector<Sample>& windows,
                                    const std::vector<std::vector<ActionInstance>>& predictions,
                                    const FeatureSequence& features, const PostprocessConfig& config,
                                    const postproc::ExternalScores* external) {
  if (windows.size() != predictions.size()) throw std::invalid_argument("one prediction list per window expected");
  std::vector<postproc::ProposalSet> sets;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const Sample& w = windows[i];
    postproc::ProposalSet set;
    set.video_id = w.video_id;
    set.unit = TimeUnit::kFeature;
    set.feature_stride = features.feature_stride;
    set.frame_rate = features.frame_rate;
    set.proposals = predictions[i];
    if (w.scale == 1.0) {
      set.window_offset = w.offset;
    } else {
      set.window_offset = 0;
      for (auto& p : set.proposals) p.interval = {w.to_source(p.interval.start), w.to_source(p.interval.end)};
    }
    sets.push_back(std::move(set));
  }
  postproc::ProposalSet merged = postproc::aggregate_windows(sets);
  if (external != nullptr) merged = postproc::fuse_external_classifier(merged, *external, config.external_top_k);
  switch (config.method) {
    case SuppressionMethod::kSoftNms: merged = postproc::soft_nms(merged, config.soft_nms); break;
    case SuppressionMethod::kNms: merged = postproc::nms(merged, config.nms_threshold, config.soft_nms.per_class); break;
    case SuppressionMethod::kNone: break;
  }
  std::stable_sort(merged.proposals.begin(), merged.proposals.end(),
                   [](const ActionInstance& a, const ActionInstance& b) {
                     return a.score.value_or(0.0) > b.score.value_or(0.0);
                   });
  const auto cap = static_cast<std::size_t>(config.max_predictions_per_video);
  if (merged.proposals.size() > cap) merged.proposals.resize(cap);
  return merged;
}

std::vector<postproc::ProposalSet> detect(const Detector& model, const Dataset& data,
                                          const std::vector<std::string>& video_ids, const ExperimentConfig& config,
                                          bool use_stage2) {
  std::optional<postproc::ExternalScores> external;
  if (!config.postprocess.external_scores.empty()) {
    external = postproc::load_external_scores(config.postprocess.external_scores, data.database.label_space);
  }
  std::vector<postproc::ProposalSet> out;
  out.reserve(video_ids.size());
  for (const auto& id : video_ids) {
    const FeatureSequence& features = data.features.get(id);
    const std::vector<Sample> windows = inference_samples(id, features, config.dataset.mapping);
    std::vector<std::vector<ActionInstance>> predictions;
    predictions.reserve(windows.size());
    for (const auto& w : windows) predictions.push_back(model.predict(w.input, use_stage2));
    out.push_back(merge_windows(windows, predictions, features, config.postprocess, external ? &*external : nullptr));
  }
  return out;
}

postproc::EvalResult evaluate_detections(const std::vector<postproc::ProposalSet>& detections, const Dataset& data,
                                         const std::vector<std::string>& video_ids, const ExperimentConfig& config) {
  const postproc::EvalConfig eval{config.postprocess.effective_thresholds(),
                                  config.postprocess.max_predictions_per_video};
  if (config.dataset.binary_mode && config.postprocess.external_scores.empty()) {
    data::AnnotationDatabase agnostic = data.database;
    agnostic.label_space.class_names = {"action"};
    for (auto& [id, video] : agnostic.videos) {
      for (auto& a : video.annotations) a.label = 0;
    }
    return postproc::mean_average_precision(detections, agnostic, video_ids, eval);
  }
  return postproc::mean_average_precision(detections, data.database, video_ids, eval);
}

std::vector<postproc::ProposalSet> oracle_detections(const Dataset& data, const std::vector<std::string>& video_ids) {
  if (!data.signatures) throw std::invalid_argument("the correlation oracle needs synthetic signatures");
  std::vector<postproc::ProposalSet> out;
  for (const auto& id : video_ids) {
    const FeatureSequence& features = data.features.get(id);
    postproc::ProposalSet set;
    set.video_id = id;
    set.unit = TimeUnit::kFeature;
    set.window_offset = 0;
    set.feature_stride = features.feature_stride;
    set.frame_rate = features.frame_rate;
    set.proposals = data::correlation_oracle(features, *data.signatures);
    out.push_back(postproc::aggregate_windows({set}));
  }
  return out;
}

}  // namespace minitad::runner
