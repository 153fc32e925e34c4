#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cli_common.hpp"

namespace cli {

struct BinArgs {
  std::uint32_t bins = 41;
  double t_min = -1.0;
  double t_max = 1.0;
  bool no_overflow = false;

  tdu::TimeBins time_bins() const { return {t_min, t_max, bins, !no_overflow}; }
};

struct FssArgs {
  BinArgs bins;
  std::uint32_t epoch_width = 0;
};

struct BootArgs {
  std::uint32_t resamples = 5000;
  std::uint64_t seed = 0;
  std::uint32_t hist_bins = 40;
  std::optional<double> t_min, t_max;
};

struct CcdfArgs {
  std::uint32_t window = 500;
  double percentile = 95.0;
  std::size_t min_samples = 50;
};

struct CrossingArgs {
  BinArgs bins;
  double window = 0.5;
};

void analyze_fss(const AnalyzeCommon& c, const FssArgs& a);
void analyze_bootstrap(const AnalyzeCommon& c, const BootArgs& a);
void analyze_loo(const AnalyzeCommon& c, const BootArgs& a);
void analyze_ccdf(const AnalyzeCommon& c, const CcdfArgs& a);
void analyze_crossing(const AnalyzeCommon& c, const CrossingArgs& a);

}  // namespace cli
