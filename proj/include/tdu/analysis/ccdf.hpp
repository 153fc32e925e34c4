#pragma once

// Distribution of epoch-summed avalanches near grokking, cutoff scaling
// s_c ~ N^D_cut and data collapse.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tdu/analysis/epochs.hpp"
#include "tdu/analysis/fit.hpp"
#include "tdu/error.hpp"
#include "tdu/percentile.hpp"

namespace tdu {

struct CcdfCurve {
  double n_params = 0.0;
  std::vector<double> x;  // ascending distinct values
  std::vector<double> p;  // P(S >= x)
};

/// Empirical complementary CDF, P(S >= x) at each distinct sample value.
inline CcdfCurve empirical_ccdf(std::span<const double> samples, double n_params = 0.0) {
  std::vector<double> v(samples.begin(), samples.end());
  std::sort(v.begin(), v.end());
  CcdfCurve c;
  c.n_params = n_params;
  const double n = static_cast<double>(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0 && v[i] == v[i - 1]) continue;
    c.x.push_back(v[i]);
    c.p.push_back(static_cast<double>(v.size() - i) / n);
  }
  return c;
}

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
inline double ks_distance(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::insufficient_data, "KS distance of an empty sample");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  const double na = static_cast<double>(x.size()), nb = static_cast<double>(y.size());
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] <= v) ++i;
    while (j < y.size() && y[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

struct EpochSumSample {
  double n_params = 0.0;
  std::vector<double> s_epoch;
};

/// Pools S_epoch per scale over all runs and epochs with |epoch - g| <= window.
/// Runs without a grokking epoch are skipped.
inline std::vector<EpochSumSample> window_epoch_sums(std::span<const ScaleData> scales, std::uint32_t window = 500) {
  std::vector<EpochSumSample> out;
  for (const auto& sc : scales) {
    EpochSumSample s{sc.n_params, {}};
    for (const auto& run : sc.runs) {
      if (!run.grok_epoch) continue;
      const auto g = static_cast<std::int64_t>(*run.grok_epoch);
      for (const auto& e : run.epochs) {
        if (std::abs(static_cast<std::int64_t>(e.epoch) - g) <= static_cast<std::int64_t>(window)) {
          s.s_epoch.push_back(static_cast<double>(e.s_epoch));
        }
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

struct CutoffAnalysis {
  std::vector<CcdfCurve> ccdf;
  std::vector<std::pair<double, double>> cutoffs;  // (N, s_c)
  std::optional<ScalingFit> fit;                   // empty with fewer than 3 scales
  std::vector<CcdfCurve> collapse;                 // CCDF of S / N^D_cut
  std::string refusal;                             // why `fit` is empty
};

/// Per-scale CCDFs, s_c = cutoff percentile of each pooled sample, and the
/// fit s_c ~ N^D_cut. Every scale must have at least `min_samples` samples.
inline CutoffAnalysis ccdf_and_cutoff(std::span<const EpochSumSample> samples, double cutoff_percentile = 95.0,
                                      std::size_t min_samples = 50) {
  CutoffAnalysis res;
  for (const auto& s : samples) {
    if (s.s_epoch.size() < min_samples) {
      throw Error(ErrorCode::insufficient_data, "scale N=" + std::to_string(static_cast<long long>(s.n_params)) +
                                                    " has " + std::to_string(s.s_epoch.size()) +
                                                    " in-window epochs, need >= " + std::to_string(min_samples));
    }
    res.ccdf.push_back(empirical_ccdf(s.s_epoch, s.n_params));
    res.cutoffs.emplace_back(s.n_params, percentile(s.s_epoch, cutoff_percentile));
  }
  if (samples.size() < 3) {
    res.refusal = "cutoff fit needs >= 3 scales, got " + std::to_string(samples.size());
    return res;
  }
  res.fit = fit_power_law(res.cutoffs);
  for (const auto& s : samples) {
    const double scale = std::pow(s.n_params, res.fit->exponent);
    std::vector<double> rescaled(s.s_epoch.size());
    for (std::size_t i = 0; i < rescaled.size(); ++i) rescaled[i] = s.s_epoch[i] / scale;
    res.collapse.push_back(empirical_ccdf(rescaled, s.n_params));
  }
  return res;
}

}  // namespace tdu
