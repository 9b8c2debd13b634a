#include "minitad/runner/cli.hpp"

#include "minitad/data/annotations.hpp"
#include "minitad/data/synthetic.hpp"
#include "minitad/postproc/io.hpp"
#include "minitad/runner/grid.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace minitad::runner {

namespace {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

ExperimentConfig load_with_overrides(const std::string& path, const std::vector<std::string>& sets) {
  nlohmann::json doc = yaml_to_json(read_text(path));
  // Parse first so unknown keys are reported before any override runs.
  doc = config_to_json(config_from_json(doc));
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got " + s);
    apply_override(doc, s.substr(0, eq), s.substr(eq + 1));
  }
  return config_from_json(doc);
}

std::string fmt(double v, int decimals = 4) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

struct TrainArgs {
  std::string config;
  std::vector<std::string> sets;
  long long seed = -1;
  std::string out;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const ExperimentConfig config = load_with_overrides(a.config, a.sets);
  const std::uint64_t seed = a.seed >= 0 ? static_cast<std::uint64_t>(a.seed) : config.train.seeds.front();
  const std::filesystem::path dir =
      a.out.empty() ? run_directory(cache_root(), config_hash(config), seed) : std::filesystem::path(a.out);
  const Dataset data = load_dataset(config.dataset);
  TrainOptions options;
  options.out_dir = dir;
  options.on_epoch = [&out](const EpochLog& log) {
    out << "epoch " << log.epoch << " loss " << fmt(log.mean_loss) << " lr " << log.learning_rate;
    if (log.eval_average) out << " val_avg_mAP " << fmt(*log.eval_average);
    out << '\n';
  };
  const TrainedRun run = train_run(config, data, seed, options);
  out << "best epoch " << run.result.best_epoch << " average mAP " << fmt(run.result.average_map) << '\n';
  out << "run result: " << (dir / "run_result.json").string() << '\n';
  return 0;
}

struct TestArgs {
  std::string config;
  std::string checkpoint;
  std::string out;
  bool no_stage2 = false;
};

int cmd_test(const TestArgs& a, std::ostream& out) {
  ExperimentConfig ckpt_config;
  std::optional<ExperimentConfig> override_config;
  if (!a.config.empty()) override_config = load_config(a.config);
  // The dataset section decides feature dim and classes, so load it first.
  const nlohmann::json ckpt = nlohmann::json::parse(read_text(a.checkpoint));
  ckpt_config = config_from_json(ckpt.at("config"));
  const ExperimentConfig& eval_config = override_config ? *override_config : ckpt_config;
  const Dataset data = load_dataset(eval_config.dataset);
  const auto model = load_checkpoint(a.checkpoint, data);
  ExperimentConfig run_config = ckpt_config;
  run_config.dataset = eval_config.dataset;
  run_config.postprocess = eval_config.postprocess;
  const auto dets = detect(*model, data, data.eval_ids, run_config, !a.no_stage2);
  const postproc::EvalResult result = evaluate_detections(dets, data, data.eval_ids, run_config);
  const std::filesystem::path dir =
      a.out.empty() ? std::filesystem::path(a.checkpoint).parent_path() : std::filesystem::path(a.out);
  postproc::save_detections(dets, data.database.label_space, dir / "test_detections.json");
  postproc::save_report(result, dir / "test_report.csv");
  out << postproc::report_csv(result);
  return 0;
}

struct EvalArgs {
  std::string pred;
  std::string ann;
  std::string protocol = "activitynet";
  std::string subset;
  int max_per_video = 100;
  std::string out;
};

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const auto loaded = data::load_annotations(a.ann);
  for (const auto& w : loaded.warnings) err << "warning: " << w << '\n';
  const data::AnnotationDatabase& db = loaded.database;
  const auto preds = postproc::load_detections(a.pred, db.label_space);
  std::vector<std::string> ids;
  if (a.subset.empty()) {
    for (const auto& [id, v] : db.videos) ids.push_back(id);
  } else {
    ids = db.ids(parse_subset(a.subset));
  }
  const postproc::EvalResult result =
      postproc::mean_average_precision(preds, db, ids, {postproc::protocol_thresholds(a.protocol), a.max_per_video});
  const std::string csv = postproc::report_csv(result);
  if (a.out.empty()) {
    out << csv;
  } else {
    write_text(a.out, csv);
    out << "average mAP " << fmt(result.average) << " written to " << a.out << '\n';
  }
  return 0;
}

struct ExtractArgs {
  std::string config;
  std::string out;
  long long seed = -1;
};

int cmd_extract(const ExtractArgs& a, std::ostream& out) {
  const ExperimentConfig config = load_config(a.config);
  if (config.backbone.mode == backbone::BackboneMode::kPrecomputed) {
    throw std::invalid_argument("backbone.mode is precomputed; there is nothing to extract");
  }
  const std::uint64_t seed = a.seed >= 0 ? static_cast<std::uint64_t>(a.seed) : config.train.seeds.front();
  const Dataset data = load_dataset(config.dataset);
  const backbone::Backbone encoder(config.backbone, data.feature_dim(), derive_seed(seed, "backbone"));
  data::FeatureStore store;
  for (const auto& id : data.features.ids()) store.put(id, encoder.encode(data.features.get(id)));
  store.save(a.out);
  out << "encoded " << store.size() << " videos into " << (std::filesystem::path(a.out) / "index.json").string()
      << '\n';
  return 0;
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir, std::ostream& out) {
  const data::SyntheticSpec spec = synthetic_spec_from_json(yaml_to_json(read_text(spec_path)));
  const data::SyntheticDataset ds = data::generate_synthetic(spec);
  const std::filesystem::path root(out_dir);
  data::save_annotations(ds.database, root / "annotations.json");
  ds.features.save(root / "features");
  out << "wrote " << ds.database.videos.size() << " videos to " << root.string() << '\n';
  return 0;
}

struct GridArgs {
  std::string config;
  std::vector<std::string> axes;
  int seeds = 0;
  std::string out;
  bool resume = false;
  long limit = -1;
};

int cmd_grid(const GridArgs& a, std::ostream& out, std::ostream& err) {
  const ExperimentConfig base = load_config(a.config);
  std::vector<GridAxis> axes;
  for (const auto& s : a.axes) axes.push_back(parse_axis(s));
  GridOptions options;
  options.out_dir = a.out.empty() ? cache_root() / ("grid_" + config_hash(base)) : std::filesystem::path(a.out);
  for (int s = 0; s < a.seeds; ++s) options.seeds.push_back(static_cast<std::uint64_t>(s));
  options.resume = a.resume;
  options.limit = a.limit;
  options.log = &err;
  const GridReport report = run_grid(base, axes, options);
  out << grid_report_csv(report);
  if (!report.complete) err << "grid incomplete; rerun with --resume to finish\n";
  return 0;
}

int cmd_report(const std::string& dir, std::ostream& out, std::ostream& err) {
  const GridReport report = load_grid_report(dir);
  const std::string csv = grid_report_csv(report);
  write_text(std::filesystem::path(dir) / "report.csv", csv);
  out << csv;
  if (!report.complete) err << "warning: some runs are missing\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"minitad: modular temporal action detection"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train one seed and write checkpoint and RunResult JSON");
  train_cmd->add_option("-c,--config", train.config, "Experiment config (YAML)")->required();
  train_cmd->add_option("--seed", train.seed, "Seed (default: first of train.seeds)");
  train_cmd->add_option("--out", train.out, "Run directory");
  train_cmd->add_option("--set", train.sets, "Override, dotted.key=value (repeatable)");

  TestArgs test;
  auto* test_cmd = app.add_subcommand("test", "Run a checkpoint on the evaluation subset");
  test_cmd->add_option("--checkpoint", test.checkpoint, "checkpoint.json")->required();
  test_cmd->add_option("-c,--config", test.config, "Config whose dataset/postprocess sections replace the stored ones");
  test_cmd->add_option("--out", test.out, "Output directory");
  test_cmd->add_flag("--no-stage2", test.no_stage2, "Skip Stage 2 refinement");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Score a detections file against annotations");
  eval_cmd->add_option("--pred", eval.pred, "Detections JSON")->required();
  eval_cmd->add_option("--ann", eval.ann, "Annotations JSON")->required();
  eval_cmd->add_option("--protocol", eval.protocol, "thumos or activitynet")
      ->check(CLI::IsMember({"thumos", "activitynet"}));
  eval_cmd->add_option("--subset", eval.subset, "Only videos of this subset");
  eval_cmd->add_option("--max-per-video", eval.max_per_video, "Predictions kept per video");
  eval_cmd->add_option("--out", eval.out, "CSV path (default: stdout)");

  ExtractArgs extract;
  auto* extract_cmd = app.add_subcommand("extract-features", "Encode frame features with the configured backbone");
  extract_cmd->add_option("-c,--config", extract.config, "Experiment config")->required();
  extract_cmd->add_option("--out", extract.out, "Feature store directory")->required();
  extract_cmd->add_option("--seed", extract.seed, "Backbone seed");

  std::string synth_spec;
  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth_cmd->add_option("--spec", synth_spec, "Synthetic spec (YAML)")->required();
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();

  GridArgs grid;
  auto* grid_cmd = app.add_subcommand("grid", "Run a config grid over seeds");
  grid_cmd->add_option("-c,--config", grid.config, "Base config")->required();
  grid_cmd->add_option("--axis", grid.axes, "dotted.key=v1,v2,... (repeatable)");
  grid_cmd->add_option("--seeds", grid.seeds, "Use seeds 0..N-1 (default: train.seeds)");
  grid_cmd->add_option("--out", grid.out, "Grid directory");
  grid_cmd->add_flag("--resume", grid.resume, "Skip runs that already have results");
  grid_cmd->add_option("--limit", grid.limit, "Stop after this many new runs");

  std::string report_dir;
  auto* report_cmd = app.add_subcommand("report", "Rebuild the mean±std table of a grid directory");
  report_cmd->add_option("--out", report_dir, "Grid directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*train_cmd) return cmd_train(train, out);
    if (*test_cmd) return cmd_test(test, out);
    if (*eval_cmd) return cmd_eval(eval, out, err);
    if (*extract_cmd) return cmd_extract(extract, out);
    if (*synth_cmd) return cmd_synth(synth_spec, synth_out, out);
    if (*grid_cmd) return cmd_grid(grid, out, err);
    if (*report_cmd) return cmd_report(report_dir, out, err);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    for (const auto& p : e.problems()) err << "  " << p << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace minitad::runner
