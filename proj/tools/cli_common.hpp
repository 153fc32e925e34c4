#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tdu/analysis.hpp"
#include "tdu/store.hpp"

namespace cli {

namespace fs = std::filesystem;

/// Default root for run and analysis output: $TDU_OUTPUT_ROOT, else ./runs.
inline fs::path output_root() {
  if (const char* env = std::getenv("TDU_OUTPUT_ROOT"); env && *env) return env;
  return "runs";
}

inline std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw tdu::Error(tdu::ErrorCode::io, "cannot open " + path.string());
  out.precision(17);
  return out;
}

inline std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
  return buf;
}

inline std::string opt_cell(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream s;
  s.precision(17);
  s << *v;
  return s.str();
}

/// Runs loaded for analysis, grouped by N.
struct RunSet {
  std::vector<tdu::RunSeries> runs;
  std::vector<tdu::ScaleData> scales;
  double truncation_rate = 0.0;
  std::size_t n_records = 0;
};

inline RunSet load_run_set(const std::vector<std::string>& roots, const std::string& records_file = {}) {
  const auto dirs = tdu::discover_runs(roots);
  if (dirs.empty()) throw tdu::Error(tdu::ErrorCode::insufficient_data, "no run directories found under --runs");
  RunSet set;
  std::size_t truncated = 0;
  for (const auto& d : dirs) {
    const auto data = tdu::load_run(d, records_file);
    if (data.records.empty()) {
      throw tdu::Error(tdu::ErrorCode::insufficient_data,
                       "run " + d.string() + " has no avalanche records (trained with --probe off?)");
    }
    for (const auto& r : data.records) truncated += r.truncated;
    set.n_records += data.records.size();
    set.runs.push_back(tdu::run_series_from(data));
  }
  set.truncation_rate = static_cast<double>(truncated) / static_cast<double>(set.n_records);
  set.scales = tdu::group_by_scale(set.runs);
  return set;
}

/// Grokking-aligned analyses need a grokking epoch on every run.
inline void require_grokked(const RunSet& set) {
  std::string missing;
  for (const auto& r : set.runs) {
    if (!r.grok_epoch) missing += " " + r.run_id;
  }
  if (!missing.empty()) {
    throw tdu::Error(tdu::ErrorCode::insufficient_data,
                     "runs without a grokking epoch cannot be aligned; pass only grokked runs or rerun with a larger "
                     "--max-epochs:" + missing);
  }
}

inline void require_scales(const RunSet& set, std::size_t k, const std::string& what) {
  if (set.scales.size() < k) {
    throw tdu::Error(tdu::ErrorCode::insufficient_data,
                     what + " needs runs at >= " + std::to_string(k) + " distinct parameter counts, got " +
                         std::to_string(set.scales.size()) + "; add runs at more widths");
  }
}

inline std::string describe(const RunSet& set) {
  std::string s = std::to_string(set.runs.size()) + " runs at " + std::to_string(set.scales.size()) + " scales (N =";
  for (const auto& sc : set.scales) s += " " + std::to_string(static_cast<long long>(sc.n_params));
  return s + ")";
}

/// Options shared by the analysis subcommands.
struct AnalyzeCommon {
  std::vector<std::string> runs;
  std::string out;
  std::string records;
  std::string observable = "s_max";

  fs::path out_dir(const std::string& sub) const {
    return out.empty() ? output_root() / "analysis" / sub : fs::path(out);
  }
};

inline void add_common(CLI::App* app, AnalyzeCommon& c, bool need_runs = true) {
  auto* r = app->add_option("--runs", c.runs, "Run directories, or parents whose subdirectories are runs");
  if (need_runs) r->required();
  app->add_option("--out", c.out, "Output directory (default: $TDU_OUTPUT_ROOT/analysis/<subcommand>)");
  app->add_option("--records", c.records, "Record file name inside each run (default: the manifest's)");
  app->add_option("--observable", c.observable, "s_max | s_avg | s_epoch")
      ->capture_default_str()
      ->check(CLI::IsMember({"s_max", "s_avg", "s_epoch"}));
}

void register_train(CLI::App& app);
void register_sweep(CLI::App& app);
void register_probe(CLI::App& app);
void register_analyze(CLI::App& app);
void register_repro(CLI::App& app);

}  // namespace cli
