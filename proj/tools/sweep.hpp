#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "tdu/config.hpp"

namespace cli {

/// Base config plus axes; the cells are the Cartesian product of the
/// non-empty axes. "widths" means hidden width for XOR and d_model for ModAdd.
struct SweepSpec {
  std::string name = "sweep";
  tdu::RunSpec base;
  std::vector<std::uint32_t> widths;
  std::vector<std::uint64_t> seeds;
  std::vector<double> alphas;
  std::vector<double> percentiles;
  std::vector<std::uint32_t> ps;
  std::vector<tdu::ProbeMode> probe_modes;
};

struct SweepCell {
  std::string name;
  tdu::RunSpec spec;
};

SweepSpec load_sweep_spec(const std::filesystem::path& path);
std::vector<SweepCell> enumerate_cells(const SweepSpec& spec);

struct CellOutcome {
  SweepCell cell;
  bool skipped = false;  // already terminal from an earlier invocation
  bool produced = false;
  std::optional<tdu::RunManifest> manifest;
};

/// Runs every cell not already terminal under `root`, at most `workers` at a time.
std::vector<CellOutcome> run_sweep(const SweepSpec& spec, const std::filesystem::path& root, unsigned workers);

/// Writes summary.csv under `root` and prints the table plus timing spread.
void summarize_sweep(const std::vector<CellOutcome>& cells, const std::filesystem::path& root);

}  // namespace cli
