#pragma once

#include "minitad/runner/train.hpp"

#include <iosfwd>

namespace minitad::runner {

/// One dotted config path and the values it sweeps.
struct GridAxis {
  std::string path;
  std::vector<std::string> values;
};

/// Parses "a.b=v1,v2,..."; commas inside brackets or braces do not split.
[[nodiscard]] GridAxis parse_axis(const std::string& text);

struct GridCell {
  std::vector<std::pair<std::string, std::string>> overrides;
  ExperimentConfig config;
  std::string config_hash;

  // "neck.macro_block=conv,neck.sequential_module=lstm", or "base".
  [[nodiscard]] std::string label() const;
};

/// Cartesian product of the axes, first axis slowest. No axes gives the base cell.
[[nodiscard]] std::vector<GridCell> expand_grid(const ExperimentConfig& base, const std::vector<GridAxis>& axes);

struct CellSummary {
  std::string label;
  std::string config_hash;
  std::vector<RunResult> runs;  // in seed order
  postproc::SeedStatistics average_map;
};

struct GridReport {
  std::vector<CellSummary> cells;
  bool complete = true;  // every (cell, seed) run exists
};

/// CSV with columns cell,config_hash,num_seeds,mean,std,formatted.
[[nodiscard]] std::string grid_report_csv(const GridReport& report);

struct GridOptions {
  std::filesystem::path out_dir;
  std::vector<std::uint64_t> seeds;  // empty: the base config's seed list
  bool resume = false;               // skip runs whose result file exists
  long limit = -1;                   // stop after this many new runs; < 0 is unbounded
  bool save_artifacts = true;        // checkpoints and detections per run
  std::ostream* log = nullptr;
};

/// Runs every (cell, seed) pair and writes grid.json, runs/ and report.csv
/// under `out_dir`.
GridReport run_grid(const ExperimentConfig& base, const std::vector<GridAxis>& axes, const GridOptions& options);

/// Rebuilds the report from a grid directory's manifest and run files.
[[nodiscard]] GridReport load_grid_report(const std::filesystem::path& out_dir);

/// Directory of one run: `<root>/runs/<hash>_s<seed>`.
[[nodiscard]] std::filesystem::path run_directory(const std::filesystem::path& root, const std::string& hash,
                                                  std::uint64_t seed);

}  // namespace minitad::runner
