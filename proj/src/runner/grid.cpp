#include "minitad/runner/grid.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

namespace minitad::runner {

GridAxis parse_axis(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw std::invalid_argument("axis must look like key=v1,v2: " + text);
  GridAxis axis;
  axis.path = text.substr(0, eq);
  int depth = 0;
  std::string current;
  for (std::size_t i = eq + 1; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '[' || c == '{') ++depth;
    if (c == ']' || c == '}') --depth;
    if (c == ',' && depth == 0) {
      axis.values.push_back(current);
      current.clear();
    } else {
      current += c;
    }
  }
  axis.values.push_back(current);
  for (const auto& v : axis.values) {
    if (v.empty()) throw std::invalid_argument("empty value in axis " + text);
  }
  return axis;
}

std::string GridCell::label() const {
  if (overrides.empty()) return "base";
  std::string out;
  for (const auto& [path, value] : overrides) {
    if (!out.empty()) out += ';';
    out += path + "=" + value;
  }
  return out;
}

std::vector<GridCell> expand_grid(const ExperimentConfig& base, const std::vector<GridAxis>& axes) {
  const nlohmann::json base_doc = config_to_json(base);
  std::vector<std::vector<std::pair<std::string, std::string>>> combos{{}};
  for (const auto& axis : axes) {
    std::vector<std::vector<std::pair<std::string, std::string>>> next;
    for (const auto& prefix : combos) {
      for (const auto& v : axis.values) {
        auto c = prefix;
        c.emplace_back(axis.path, v);
        next.push_back(std::move(c));
      }
    }
    combos = std::move(next);
  }
  std::vector<GridCell> cells;
  for (auto& overrides : combos) {
    nlohmann::json doc = base_doc;
    for (const auto& [path, value] : overrides) apply_override(doc, path, value);
    GridCell cell;
    cell.overrides = std::move(overrides);
    cell.config = config_from_json(doc);
    cell.config_hash = config_hash(cell.config);
    cells.push_back(std::move(cell));
  }
  return cells;
}

std::filesystem::path run_directory(const std::filesystem::path& root, const std::string& hash, std::uint64_t seed) {
  return root / "runs" / (hash + "_s" + std::to_string(seed));
}

std::string grid_report_csv(const GridReport& report) {
  std::ostringstream out;
  out << "cell,config_hash,num_seeds,mean,std,formatted\n";
  char buf[64];
  for (const auto& c : report.cells) {
    out << '"' << c.label << "\"," << c.config_hash << ',' << c.runs.size() << ',';
    std::snprintf(buf, sizeof(buf), "%.6f", c.average_map.mean);
    out << buf << ',';
    if (c.average_map.stddev) {
      std::snprintf(buf, sizeof(buf), "%.6f", *c.average_map.stddev);
      out << buf;
    }
    out << ',' << c.average_map.format() << '\n';
  }
  return out.str();
}

namespace {

CellSummary summarize(const std::string& label, const std::string& hash, std::vector<RunResult> runs) {
  CellSummary s;
  s.label = label;
  s.config_hash = hash;
  s.runs = std::move(runs);
  std::vector<double> values;
  for (const auto& r : s.runs) values.push_back(r.average_map);
  if (!values.empty()) s.average_map = postproc::seed_statistics(values);
  return s;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

GridReport run_grid(const ExperimentConfig& base, const std::vector<GridAxis>& axes, const GridOptions& options) {
  if (options.out_dir.empty()) throw std::invalid_argument("grid needs an output directory");
  const std::vector<GridCell> cells = expand_grid(base, axes);
  const std::vector<std::uint64_t> seeds = options.seeds.empty() ? base.train.seeds : options.seeds;
  if (seeds.size() < 5 && options.log) {
    *options.log << "warning: " << seeds.size() << " seed(s); mean±std reporting expects 5\n";
  }

  nlohmann::json manifest;
  manifest["base"] = config_to_json(base);
  manifest["seeds"] = seeds;
  manifest["axes"] = nlohmann::json::array();
  for (const auto& a : axes) manifest["axes"].push_back({{"path", a.path}, {"values", a.values}});
  manifest["cells"] = nlohmann::json::array();
  for (const auto& c : cells) manifest["cells"].push_back({{"label", c.label()}, {"config_hash", c.config_hash}});
  write_text(options.out_dir / "grid.json", manifest.dump(1) + "\n");

  std::map<std::string, Dataset> datasets;
  long started = 0;
  GridReport report;
  for (const auto& cell : cells) {
    std::vector<RunResult> runs;
    for (std::uint64_t seed : seeds) {
      const auto dir = run_directory(options.out_dir, cell.config_hash, seed);
      const auto result_path = dir / "run_result.json";
      if (options.resume && std::filesystem::exists(result_path)) {
        runs.push_back(load_run_result(result_path));
        continue;
      }
      if (options.limit >= 0 && started >= options.limit) {
        report.complete = false;
        continue;
      }
      const std::string key = config_to_json(cell.config)["dataset"].dump();
      auto it = datasets.find(key);
      if (it == datasets.end()) it = datasets.emplace(key, load_dataset(cell.config.dataset)).first;
      if (options.log) *options.log << "run " << cell.label() << " seed " << seed << '\n';
      ++started;
      TrainOptions topts;
      topts.out_dir = dir;
      TrainedRun run = train_run(cell.config, it->second, seed, topts);
      if (!options.save_artifacts) {
        std::filesystem::remove(dir / "checkpoint.json");
        std::filesystem::remove(dir / "detections.json");
        run.result.checkpoint.clear();
        run.result.detections.clear();
        save_run_result(run.result, result_path);
      }
      runs.push_back(std::move(run.result));
    }
    report.cells.push_back(summarize(cell.label(), cell.config_hash, std::move(runs)));
  }
  write_text(options.out_dir / "report.csv", grid_report_csv(report));
  return report;
}

GridReport load_grid_report(const std::filesystem::path& out_dir) {
  std::ifstream in(out_dir / "grid.json");
  if (!in) throw std::runtime_error("no grid manifest in " + out_dir.string());
  const nlohmann::json manifest = nlohmann::json::parse(in);
  const auto seeds = manifest.at("seeds").get<std::vector<std::uint64_t>>();
  GridReport report;
  for (const auto& c : manifest.at("cells")) {
    const auto hash = c.at("config_hash").get<std::string>();
    std::vector<RunResult> runs;
    for (std::uint64_t seed : seeds) {
      const auto path = run_directory(out_dir, hash, seed) / "run_result.json";
      if (std::filesystem::exists(path)) {
        runs.push_back(load_run_result(path));
      } else {
        report.complete = false;
      }
    }
    report.cells.push_back(summarize(c.at("label").get<std::string>(), hash, std::move(runs)));
  }
  return report;
}

}  // namespace minitad::runner
