#include "minitad/runner/train.hpp"

#include "minitad/postproc/io.hpp"
#include "minitad/runner/optim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace minitad::runner {

bool RunResult::same_metrics(const RunResult& o) const {
  if (config_hash != o.config_hash || seed != o.seed || thresholds != o.thresholds || map != o.map ||
      average_map != o.average_map || best_epoch != o.best_epoch || epochs != o.epochs ||
      history.size() != o.history.size()) {
    return false;
  }
  for (std::size_t i = 0; i < history.size(); ++i) {
    const EpochLog& a = history[i];
    const EpochLog& b = o.history[i];
    if (a.epoch != b.epoch || a.mean_loss != b.mean_loss || a.learning_rate != b.learning_rate ||
        a.eval_average != b.eval_average) {
      return false;
    }
  }
  return true;
}

nlohmann::json to_json(const RunResult& r) {
  nlohmann::json history = nlohmann::json::array();
  for (const auto& h : r.history) {
    nlohmann::json e = {{"epoch", h.epoch}, {"mean_loss", h.mean_loss}, {"learning_rate", h.learning_rate}};
    e["eval_average"] = h.eval_average ? nlohmann::json(*h.eval_average) : nlohmann::json(nullptr);
    history.push_back(std::move(e));
  }
  return {{"config_hash", r.config_hash},
          {"seed", r.seed},
          {"thresholds", r.thresholds},
          {"map", r.map},
          {"average_map", r.average_map},
          {"best_epoch", r.best_epoch},
          {"epochs", r.epochs},
          {"wall_time_seconds", r.wall_time_seconds},
          {"checkpoint", r.checkpoint},
          {"detections", r.detections},
          {"history", history}};
}

RunResult run_result_from_json(const nlohmann::json& doc) {
  RunResult r;
  r.config_hash = doc.at("config_hash").get<std::string>();
  r.seed = doc.at("seed").get<std::uint64_t>();
  r.thresholds = doc.at("thresholds").get<std::vector<double>>();
  r.map = doc.at("map").get<std::vector<double>>();
  r.average_map = doc.at("average_map").get<double>();
  r.best_epoch = doc.at("best_epoch").get<int>();
  r.epochs = doc.at("epochs").get<int>();
  r.wall_time_seconds = doc.value("wall_time_seconds", 0.0);
  r.checkpoint = doc.value("checkpoint", std::string{});
  r.detections = doc.value("detections", std::string{});
  for (const auto& e : doc.value("history", nlohmann::json::array())) {
    EpochLog h;
    h.epoch = e.at("epoch").get<int>();
    h.mean_loss = e.at("mean_loss").get<double>();
    h.learning_rate = e.at("learning_rate").get<double>();
    if (!e.at("eval_average").is_null()) h.eval_average = e.at("eval_average").get<double>();
    r.history.push_back(h);
  }
  return r;
}

namespace {

void write_json(const nlohmann::json& doc, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // Write-then-rename so an interrupted run never leaves a truncated file.
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << doc.dump(1) << '\n';
  }
  std::filesystem::rename(tmp, path);
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return nlohmann::json::parse(in);
}

}  // namespace

void save_run_result(const RunResult& r, const std::filesystem::path& path) { write_json(to_json(r), path); }

RunResult load_run_result(const std::filesystem::path& path) { return run_result_from_json(read_json(path)); }

void apply_channel_dropout(Matrix& values, double p, std::mt19937_64& rng) {
  if (p <= 0.0) return;
  std::bernoulli_distribution drop(std::min(p, 1.0));
  const double keep_scale = p < 1.0 ? 1.0 / (1.0 - p) : 1.0;
  for (Index c = 0; c < values.cols(); ++c) {
    if (drop(rng)) {
      values.col(c).setZero();
    } else {
      values.col(c) *= keep_scale;
    }
  }
}

void save_checkpoint(const Detector& model, std::uint64_t seed, const std::filesystem::path& path) {
  const nlohmann::json doc = {{"config", config_to_json(model.config())},
                              {"seed", seed},
                              {"num_classes", model.config().heads.num_classes},
                              {"state", model.state_to_json()}};
  write_json(doc, path);
}

std::unique_ptr<Detector> load_checkpoint(const std::filesystem::path& path, const Dataset& data,
                                          ExperimentConfig* config_out) {
  const nlohmann::json doc = read_json(path);
  const ExperimentConfig config = config_from_json(doc.at("config"));
  auto model = std::make_unique<Detector>(config, data.feature_dim(), data.num_classes(),
                                          doc.at("seed").get<std::uint64_t>());
  model->load_state(doc.at("state"));
  if (config_out) *config_out = config;
  return model;
}

std::filesystem::path cache_root() {
  if (const char* env = std::getenv("MINITAD_CACHE"); env != nullptr && *env != '\0') return env;
  return "minitad_cache";
}

namespace {

struct TrainItem {
  std::string id;
  std::vector<ActionInstance> gt_rows;
};

std::string describe(const LossParts& p, int epoch, const std::string& video_id) {
  std::ostringstream s;
  s << "non-finite loss at epoch " << epoch << " on video '" << video_id << "': total=" << p.total.item()
    << " cls=" << p.cls << " reg=" << p.reg << " aux=" << p.aux << " stage2=" << p.stage2
    << " num_positive=" << p.num_positive;
  return s.str();
}

std::size_t samples_per_epoch(const std::vector<TrainItem>& items, const Dataset& data,
                              const data::TemporalMappingConfig& mapping) {
  if (mapping.mode != data::MappingMode::kSlidingWindow) return items.size();
  std::size_t n = 0;
  for (const auto& it : items) {
    n += data::sliding_windows(data.features.get(it.id).valid_length, mapping.target_length, mapping.train_overlap)
             .size();
  }
  return n;
}

}  // namespace

TrainedRun train_run(const ExperimentConfig& config, const Dataset& data, std::uint64_t seed,
                     const TrainOptions& options) {
  config.validate();
  if (data.train_ids.empty()) throw std::invalid_argument("no training videos");
  if (data.eval_ids.empty()) throw std::invalid_argument("no validation videos");
  const auto started = std::chrono::steady_clock::now();
  const TrainConfig& tc = config.train;

  TrainedRun run;
  run.model = std::make_unique<Detector>(config, data.feature_dim(), data.num_classes(), seed);
  Detector& model = *run.model;
  const std::vector<Tensor> params = model.trainable_parameters();
  AdamW optimizer(params, tc.weight_decay);

  std::vector<TrainItem> items;
  for (const auto& id : data.train_ids) {
    const FeatureSequence& f = data.features.get(id);
    items.push_back({id, annotations_in_rows(data.database.videos.at(id), f)});
  }

  std::mt19937_64 data_rng(derive_seed(seed, "data"));
  std::mt19937_64 dropout_rng(derive_seed(seed, "dropout"));

  const int epochs = tc.effective_epochs();
  const auto batch = static_cast<std::size_t>(std::max(1, tc.batch_size));
  const long steps_per_epoch =
      static_cast<long>((samples_per_epoch(items, data, config.dataset.mapping) + batch - 1) / batch);
  const long total_steps = steps_per_epoch * epochs;
  const long warmup_steps = steps_per_epoch * tc.warmup_epochs;

  RunResult& result = run.result;
  result.config_hash = config_hash(config);
  result.seed = seed;
  result.epochs = epochs;
  double best = -1.0;
  std::vector<Matrix> best_state;
  postproc::EvalResult best_eval;

  long step = 0;
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    std::vector<std::size_t> order(items.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), data_rng);
    std::vector<Sample> samples;
    for (std::size_t i : order) {
      auto s = training_samples(items[i].id, data.features.get(items[i].id), items[i].gt_rows,
                                config.dataset.mapping, data_rng);
      for (auto& x : s) samples.push_back(std::move(x));
    }
    if (config.dataset.mapping.mode == data::MappingMode::kSlidingWindow) {
      std::shuffle(samples.begin(), samples.end(), data_rng);
    }

    double loss_sum = 0.0;
    double lr = 0.0;
    for (std::size_t b0 = 0; b0 < samples.size(); b0 += batch) {
      const std::size_t b1 = std::min(samples.size(), b0 + batch);
      optimizer.zero_grad();
      const double weight = 1.0 / static_cast<double>(b1 - b0);
      for (std::size_t k = b0; k < b1; ++k) {
        const Sample& s = samples[k];
        Matrix x = s.input.values;
        apply_channel_dropout(x, tc.channel_dropout, dropout_rng);
        const LossParts parts = model.loss(Tensor::constant(x), s.input.valid_length, s.gt);
        const double value = parts.total.item();
        if (!std::isfinite(value)) throw TrainingDiverged(describe(parts, epoch, s.video_id));
        loss_sum += value;
        ag::backward(ag::scale(parts.total, weight));
      }
      clip_grad_norm(params, tc.grad_clip);
      lr = warmup_cosine_lr(tc.learning_rate, step, warmup_steps, total_steps);
      optimizer.step(lr);
      ++step;
    }

    EpochLog log;
    log.epoch = epoch;
    log.mean_loss = loss_sum / static_cast<double>(std::max<std::size_t>(1, samples.size()));
    log.learning_rate = lr;
    const bool evaluate = epoch % std::max(1, tc.eval_every) == 0 || epoch == epochs;
    if (evaluate) {
      const auto dets = detect(model, data, data.eval_ids, config);
      const postproc::EvalResult eval = evaluate_detections(dets, data, data.eval_ids, config);
      log.eval_average = eval.average;
      if (eval.average > best) {
        best = eval.average;
        best_eval = eval;
        result.best_epoch = epoch;
        run.detections = dets;
        best_state.clear();
        for (const auto& [name, t] : model.parameters().items()) best_state.push_back(t.value());
      }
    }
    result.history.push_back(log);
    if (options.on_epoch) options.on_epoch(log);
  }

  std::size_t k = 0;
  for (const auto& [name, t] : model.parameters().items()) {
    Tensor handle = t;
    handle.mutable_value() = best_state[k++];
  }
  result.thresholds = best_eval.thresholds;
  result.map = best_eval.map;
  result.average_map = best_eval.average;
  result.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();

  if (!options.out_dir.empty()) {
    const auto checkpoint = options.out_dir / "checkpoint.json";
    const auto detections = options.out_dir / "detections.json";
    save_checkpoint(model, seed, checkpoint);
    postproc::save_detections(run.detections, data.database.label_space, detections);
    result.checkpoint = checkpoint.string();
    result.detections = detections.string();
    save_run_result(result, options.out_dir / "run_result.json");
  }
  return run;
}

}  // namespace minitad::runner
