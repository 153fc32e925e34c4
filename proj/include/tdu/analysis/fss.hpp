#pragma once

// Finite-size scaling across model sizes: time-resolved D(t), phase-split
// bootstrap, leave-one-scale-out, and absolute-epoch fits.
//
// Within one (scale, time bin) or (scale, phase) cell the observable is
// averaged geometrically over all contributing (run, epoch) samples, because
// the exponent is fitted in log space. Non-positive samples carry no log
// weight and are skipped.

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
#include "tdu/rng.hpp"

namespace tdu {

/// n uniform bins on [lo, hi] plus, optionally, one overflow bin for t > hi.
/// Points below lo are ignored. t == hi falls in the last regular bin.
struct TimeBins {
  double lo = -1.0;
  double hi = 1.0;
  std::uint32_t n = 41;
  bool overflow = true;

  double width() const noexcept { return (hi - lo) / static_cast<double>(n); }
  std::size_t count() const noexcept { return n + (overflow ? 1 : 0); }

  std::optional<std::size_t> index(double t) const noexcept {
    if (t < lo) return std::nullopt;
    if (t > hi) return overflow ? std::optional<std::size_t>(n) : std::nullopt;
    auto k = static_cast<std::size_t>(std::floor((t - lo) / width()));
    return std::min<std::size_t>(k, n - 1);
  }
};

struct BinnedFit {
  double lo = 0.0;
  double hi = 0.0;
  double center = 0.0;  // overflow bin: mean t of its samples
  bool overflow = false;
  std::size_t n_scales = 0;
  std::optional<ScalingFit> fit;  // empty when fewer than 3 scales contribute (a gap)
};

/// D(t) (Observable::s_max) or gamma(t) (Observable::s_avg).
inline std::vector<BinnedFit> fss_over_time(std::span<const ScaleData> scales, const TimeBins& bins, Observable obs) {
  if (bins.n < 1 || !(bins.hi > bins.lo)) throw Error(ErrorCode::invalid_argument, "invalid time bins");
  const std::size_t nb = bins.count();
  // values[bin][scale]
  std::vector<std::vector<std::vector<double>>> values(nb, std::vector<std::vector<double>>(scales.size()));
  double overflow_t_sum = 0.0;
  std::size_t overflow_t_count = 0;
  for (std::size_t s = 0; s < scales.size(); ++s) {
    for (const auto& run : scales[s].runs) {
      const AlignedSeries a = align_run(run);
      for (const auto& p : a.points) {
        const auto b = bins.index(p.t);
        if (!b) continue;
        values[*b][s].push_back(observe(p.stats, obs));
        if (*b == bins.n) {
          overflow_t_sum += p.t;
          ++overflow_t_count;
        }
      }
    }
  }
  std::vector<BinnedFit> out(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    auto& bf = out[b];
    if (b < bins.n) {
      bf.lo = bins.lo + bins.width() * static_cast<double>(b);
      bf.hi = b + 1 == bins.n ? bins.hi : bins.lo + bins.width() * static_cast<double>(b + 1);
      bf.center = 0.5 * (bf.lo + bf.hi);
    } else {
      bf.overflow = true;
      bf.lo = bins.hi;
      bf.hi = INFINITY;
      bf.center = overflow_t_count ? overflow_t_sum / static_cast<double>(overflow_t_count) : NAN;
    }
    std::vector<std::pair<double, double>> pts;
    for (std::size_t s = 0; s < scales.size(); ++s) {
      if (auto gm = geometric_mean_positive(values[b][s])) pts.emplace_back(scales[s].n_params, *gm);
    }
    bf.n_scales = pts.size();
    if (pts.size() >= 3) {
      try {
        bf.fit = fit_power_law(pts);
      } catch (const Error&) {
        bf.fit.reset();
      }
    }
  }
  return out;
}

/// Absolute-time fit using every sample with epoch in [epoch_lo, epoch_hi].
inline std::optional<ScalingFit> fss_in_epoch_window(std::span<const ScaleData> scales, std::uint32_t epoch_lo,
                                                     std::uint32_t epoch_hi, Observable obs) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& sc : scales) {
    std::vector<double> vals;
    for (const auto& run : sc.runs) {
      for (const auto& e : run.epochs) {
        if (e.epoch >= epoch_lo && e.epoch <= epoch_hi) vals.push_back(observe(e, obs));
      }
    }
    if (auto gm = geometric_mean_positive(vals)) pts.emplace_back(sc.n_params, *gm);
  }
  if (pts.size() < 3) return std::nullopt;
  try {
    return fit_power_law(pts);
  } catch (const Error&) {
    return std::nullopt;
  }
}

struct EpochFit {
  std::uint32_t epoch_lo = 0;
  std::uint32_t epoch_hi = 0;
  std::optional<ScalingFit> fit;
};

/// D(epoch) in absolute time with consecutive windows of `width` epochs.
inline std::vector<EpochFit> fss_over_epochs(std::span<const ScaleData> scales, std::uint32_t width, Observable obs) {
  if (width < 1) throw Error(ErrorCode::invalid_argument, "epoch window width must be >= 1");
  std::uint32_t last = 0;
  for (const auto& sc : scales) {
    for (const auto& r : sc.runs) {
      if (!r.epochs.empty()) last = std::max(last, r.epochs.back().epoch);
    }
  }
  std::vector<EpochFit> out;
  for (std::uint32_t lo = 1; lo <= last; lo += width) {
    const std::uint32_t hi = lo + width - 1;
    out.push_back({lo, hi, fss_in_epoch_window(scales, lo, hi, obs)});
  }
  return out;
}

// ----------------------------------------------------------------- phases

enum class Phase { pre, post, synth };

constexpr std::string_view to_string(Phase p) noexcept {
  switch (p) {
    case Phase::pre: return "pre";
    case Phase::post: return "post";
    case Phase::synth: return "synth";
  }
  return "pre";
}

/// Observable samples of one scale within one phase. Each entry is one
/// (run, epoch) sample.
struct ScalePool {
  double n_params = 0.0;
  std::vector<double> values;
};

struct PhaseWindow {
  std::optional<double> t_min;  // inclusive
  std::optional<double> t_max;  // inclusive
};

/// Split at t = 0: pre is t < 0, post is t >= 0 (the grokking epoch itself is post).
inline std::pair<std::vector<ScalePool>, std::vector<ScalePool>> phase_pools(std::span<const ScaleData> scales,
                                                                              Observable obs,
                                                                              const PhaseWindow& window = {}) {
  std::vector<ScalePool> pre, post;
  for (const auto& sc : scales) {
    ScalePool a{sc.n_params, {}}, b{sc.n_params, {}};
    for (const auto& run : sc.runs) {
      for (const auto& p : align_run(run).points) {
        if (window.t_min && p.t < *window.t_min) continue;
        if (window.t_max && p.t > *window.t_max) continue;
        (p.t < 0.0 ? a : b).values.push_back(observe(p.stats, obs));
      }
    }
    if (!a.values.empty()) pre.push_back(std::move(a));
    if (!b.values.empty()) post.push_back(std::move(b));
  }
  return {std::move(pre), std::move(post)};
}

/// Pools for absolute-time data (no alignment), e.g. synthetic runs.
inline std::vector<ScalePool> all_epoch_pools(std::span<const ScaleData> scales, Observable obs) {
  std::vector<ScalePool> out;
  for (const auto& sc : scales) {
    ScalePool p{sc.n_params, {}};
    for (const auto& run : sc.runs) {
      for (const auto& e : run.epochs) p.values.push_back(observe(e, obs));
    }
    if (!p.values.empty()) out.push_back(std::move(p));
  }
  return out;
}

inline std::optional<ScalingFit> plug_in_fit(std::span<const ScalePool> pools) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& p : pools) {
    if (auto gm = geometric_mean_positive(p.values)) pts.emplace_back(p.n_params, *gm);
  }
  if (pts.size() < 3) return std::nullopt;
  try {
    return fit_power_law(pts);
  } catch (const Error&) {
    return std::nullopt;
  }
}

// ----------------------------------------------------------------- bootstrap

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::uint64_t> counts;
};

struct BootstrapSummary {
  Phase phase = Phase::pre;
  double mean_D = 0.0;
  double std_D = 0.0;
  std::uint32_t n_resamples = 0;  // successful resamples
  std::uint32_t failed = 0;       // resamples whose fit was impossible
  double plug_in_D = 0.0;
  std::size_t n_scales = 0;
  Histogram distribution;
  std::vector<double> samples;
};

struct BootstrapOptions {
  std::uint32_t n_resamples = 5000;
  std::uint64_t seed = 0;
  std::uint32_t hist_bins = 40;
  Observable observable = Observable::s_max;
  PhaseWindow window;
};

/// Resamples each scale's pool with replacement, refits, and summarizes the
/// exponent. Resample r draws from Rng(derive_seed(seed, {kTagBoot, phase, r})),
/// so results do not depend on evaluation order.
inline std::optional<BootstrapSummary> bootstrap_pools(std::span<const ScalePool> pools, Phase phase,
                                                       const BootstrapOptions& opt) {
  if (pools.size() < 3) return std::nullopt;
  const auto plug = plug_in_fit(pools);
  if (!plug) return std::nullopt;
  BootstrapSummary s;
  s.phase = phase;
  s.plug_in_D = plug->exponent;
  s.n_scales = pools.size();
  s.samples.reserve(opt.n_resamples);
  std::vector<std::pair<double, double>> pts;
  for (std::uint32_t r = 0; r < opt.n_resamples; ++r) {
    Rng rng(derive_seed(opt.seed, {kTagBoot, static_cast<std::uint64_t>(phase), r}));
    pts.clear();
    for (const auto& p : pools) {
      double acc = 0.0;
      std::size_t k = 0;
      for (std::size_t i = 0; i < p.values.size(); ++i) {
        const double v = p.values[rng.below(p.values.size())];
        if (v > 0.0) {
          acc += std::log(v);
          ++k;
        }
      }
      if (k > 0) pts.emplace_back(p.n_params, std::exp(acc / static_cast<double>(k)));
    }
    if (pts.size() < 3) {
      ++s.failed;
      continue;
    }
    try {
      s.samples.push_back(fit_power_law(pts).exponent);
    } catch (const Error&) {
      ++s.failed;
    }
  }
  s.n_resamples = static_cast<std::uint32_t>(s.samples.size());
  if (s.samples.empty()) return std::nullopt;
  double mean = 0.0;
  for (double v : s.samples) mean += v;
  mean /= static_cast<double>(s.samples.size());
  double var = 0.0;
  for (double v : s.samples) var += (v - mean) * (v - mean);
  s.mean_D = mean;
  s.std_D = s.samples.size() > 1 ? std::sqrt(var / static_cast<double>(s.samples.size() - 1)) : 0.0;

  const auto [mn, mx] = std::minmax_element(s.samples.begin(), s.samples.end());
  s.distribution.lo = *mn;
  s.distribution.hi = *mx;
  s.distribution.counts.assign(std::max<std::uint32_t>(opt.hist_bins, 1), 0);
  const double span = *mx - *mn;
  for (double v : s.samples) {
    std::size_t b = span > 0.0 ? static_cast<std::size_t>((v - *mn) / span * static_cast<double>(s.distribution.counts.size())) : 0;
    b = std::min(b, s.distribution.counts.size() - 1);
    ++s.distribution.counts[b];
  }
  return s;
}

struct PhaseSplit {
  std::optional<BootstrapSummary> pre;
  std::optional<BootstrapSummary> post;
};

/// Bootstrap of D on each side of t = 0. A phase with fewer than three
/// scales is reported absent.
inline PhaseSplit bootstrap_phase_split(std::span<const ScaleData> scales, const BootstrapOptions& opt = {}) {
  auto [pre, post] = phase_pools(scales, opt.observable, opt.window);
  return {bootstrap_pools(pre, Phase::pre, opt), bootstrap_pools(post, Phase::post, opt)};
}

// ----------------------------------------------------------------- leave one out

struct LooRow {
  double omitted_n = 0.0;
  std::optional<double> d_pre;
  std::optional<double> d_post;
  std::optional<double> shift_pre;   // d_pre - full-set d_pre
  std::optional<double> shift_post;
};

struct LooResult {
  std::optional<double> full_pre;
  std::optional<double> full_post;
  std::vector<LooRow> rows;  // one per scale, ascending N
};

inline LooResult leave_one_scale_out(std::span<const ScaleData> scales, Observable obs = Observable::s_max,
                                     const PhaseWindow& window = {}) {
  if (scales.size() < 4) {
    throw Error(ErrorCode::insufficient_data,
                "leave-one-scale-out needs >= 4 scales, got " + std::to_string(scales.size()));
  }
  LooResult res;
  auto fits = [&](std::span<const ScaleData> subset) {
    auto [pre, post] = phase_pools(subset, obs, window);
    auto fp = plug_in_fit(pre);
    auto fq = plug_in_fit(post);
    return std::pair(fp ? std::optional(fp->exponent) : std::nullopt, fq ? std::optional(fq->exponent) : std::nullopt);
  };
  std::tie(res.full_pre, res.full_post) = fits(scales);
  for (std::size_t k = 0; k < scales.size(); ++k) {
    std::vector<ScaleData> subset;
    for (std::size_t j = 0; j < scales.size(); ++j) {
      if (j != k) subset.push_back(scales[j]);
    }
    LooRow row;
    row.omitted_n = scales[k].n_params;
    std::tie(row.d_pre, row.d_post) = fits(subset);
    if (row.d_pre && res.full_pre) row.shift_pre = *row.d_pre - *res.full_pre;
    if (row.d_post && res.full_post) row.shift_post = *row.d_post - *res.full_post;
    res.rows.push_back(row);
  }
  return res;
}

}  // namespace tdu
