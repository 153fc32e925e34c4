#pragma once

// Readouts of a D(t) series: shadow-vs-on difference, the D = 1 crossing, and
// threshold classification of cohorts by D at a fixed epoch.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tdu/analysis/fss.hpp"
#include "tdu/config.hpp"
#include "tdu/error.hpp"

namespace tdu {

struct DeltaPoint {
  double t = 0.0;
  double d_shadow = 0.0;
  double d_on = 0.0;
  double delta = 0.0;  // d_shadow - d_on
};

struct DeltaResult {
  std::vector<DeltaPoint> points;
  double max_abs = 0.0;
};

/// Pointwise D_shadow - D_on on bins present in both series with |t| <= window.
/// Bins are matched by center. Series without any shared bin are an error.
inline DeltaResult shadow_delta(std::span<const BinnedFit> shadow, std::span<const BinnedFit> on, double window = 0.5) {
  constexpr double kMatchTol = 1e-9;
  DeltaResult res;
  bool any_shared = false;
  for (const auto& a : shadow) {
    if (a.overflow) continue;
    auto it = std::find_if(on.begin(), on.end(), [&](const BinnedFit& b) {
      return !b.overflow && std::abs(b.center - a.center) < kMatchTol && std::abs(b.lo - a.lo) < kMatchTol;
    });
    if (it == on.end()) continue;
    any_shared = true;
    if (std::abs(a.center) > window || !a.fit || !it->fit) continue;
    const double d = a.fit->exponent - it->fit->exponent;
    res.points.push_back({a.center, a.fit->exponent, it->fit->exponent, d});
    res.max_abs = std::max(res.max_abs, std::abs(d));
  }
  if (!any_shared) throw Error(ErrorCode::invalid_argument, "shadow and probe-on series share no time bins");
  if (res.points.empty()) {
    throw Error(ErrorCode::insufficient_data, "no time bin within the window is fitted in both series");
  }
  return res;
}

enum class CrossingDirection { none, descending, ascending };

constexpr std::string_view to_string(CrossingDirection d) noexcept {
  switch (d) {
    case CrossingDirection::descending: return "descending";
    case CrossingDirection::ascending: return "ascending";
    case CrossingDirection::none: return "none";
  }
  return "none";
}

struct CrossingReport {
  std::optional<double> t_cross;
  CrossingDirection direction = CrossingDirection::none;
  std::optional<double> d0;  // fitted D in the bin containing t = 0
  std::optional<double> d0_std_error;
  std::size_t bins_in_window = 0;
};

/// First sign change of D - 1 between consecutive fitted bins whose centers
/// lie within |t| <= window, located by linear interpolation in t. A bin with
/// D exactly 1 counts as a crossing at its center.
inline CrossingReport crossing_detector(std::span<const BinnedFit> series, double window = 0.5) {
  CrossingReport rep;
  std::vector<const BinnedFit*> pts;
  for (const auto& b : series) {
    if (b.overflow) continue;
    if (b.lo <= 0.0 && 0.0 < b.hi && b.fit) {
      rep.d0 = b.fit->exponent;
      rep.d0_std_error = b.fit->std_error;
    }
    if (std::abs(b.center) <= window && b.fit) pts.push_back(&b);
  }
  if (!rep.d0) {
    // t = 0 exactly on the upper edge of the last bin
    for (const auto& b : series) {
      if (!b.overflow && b.hi == 0.0 && b.fit) {
        rep.d0 = b.fit->exponent;
        rep.d0_std_error = b.fit->std_error;
      }
    }
  }
  std::sort(pts.begin(), pts.end(), [](const BinnedFit* a, const BinnedFit* b) { return a->center < b->center; });
  rep.bins_in_window = pts.size();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double yi = pts[i]->fit->exponent - 1.0;
    if (yi == 0.0) {
      rep.t_cross = pts[i]->center;
      const double before = i > 0 ? pts[i - 1]->fit->exponent - 1.0 : 0.0;
      const double after = i + 1 < pts.size() ? pts[i + 1]->fit->exponent - 1.0 : 0.0;
      const double slope = after - before;
      rep.direction = slope < 0.0 ? CrossingDirection::descending
                      : slope > 0.0 ? CrossingDirection::ascending
                                    : CrossingDirection::none;
      if (rep.direction == CrossingDirection::none) rep.t_cross.reset();
      else return rep;
      continue;
    }
    if (i + 1 == pts.size()) break;
    const double yj = pts[i + 1]->fit->exponent - 1.0;
    if (yj == 0.0) continue;
    if ((yi > 0.0) != (yj > 0.0)) {
      const double ti = pts[i]->center, tj = pts[i + 1]->center;
      rep.t_cross = ti + (tj - ti) * (yi / (yi - yj));
      rep.direction = yi > 0.0 ? CrossingDirection::descending : CrossingDirection::ascending;
      return rep;
    }
  }
  return rep;
}

// ----------------------------------------------------------------- early warning

/// One classification unit: a cohort of runs spanning >= 3 scales whose
/// absolute-time exponent was fitted at the probe epoch.
struct CohortD {
  std::string id;
  double d = 0.0;
  double r_squared = 0.0;
  bool grokked = false;
};

struct EarlyWarningRow {
  std::string id;
  double d = 0.0;
  double r_squared = 0.0;
  bool realized_grok = false;
  bool predicted_grok = false;
  bool gated_out = false;  // fit quality below the gate; not classified
};

struct EarlyWarningReport {
  double threshold = 0.0;
  double r2_gate = 0.95;
  std::vector<EarlyWarningRow> rows;
  std::size_t true_pos = 0, true_neg = 0, false_pos = 0, false_neg = 0;
  std::size_t n_grokked = 0, n_ungrokked = 0;
  double accuracy = 0.0;  // over classified rows
};

/// Groups runs by (seed, realized outcome) and fits D across scales using the
/// samples with |epoch - probe_epoch| <= half_width. Groups reaching fewer
/// than three scales produce no cohort.
inline std::vector<CohortD> cohort_exponents(std::span<const ScaleData> scales, std::uint32_t probe_epoch,
                                             std::uint32_t half_width = 0, Observable obs = Observable::s_max) {
  std::map<std::pair<std::uint64_t, bool>, std::vector<std::pair<double, double>>> groups;
  for (const auto& sc : scales) {
    std::map<std::pair<std::uint64_t, bool>, std::vector<double>> per_group;
    for (const auto& run : sc.runs) {
      if (run.status != RunStatus::grokked && run.status != RunStatus::ungrokked) continue;
      auto& vals = per_group[{run.seed, run.status == RunStatus::grokked}];
      for (const auto& e : run.epochs) {
        const auto lo = probe_epoch > half_width ? probe_epoch - half_width : 0u;
        if (e.epoch >= lo && e.epoch <= probe_epoch + half_width) vals.push_back(observe(e, obs));
      }
    }
    for (const auto& [key, vals] : per_group) {
      if (auto gm = geometric_mean_positive(vals)) groups[key].emplace_back(sc.n_params, *gm);
    }
  }
  std::vector<CohortD> out;
  for (const auto& [key, pts] : groups) {
    if (pts.size() < 3) continue;
    try {
      const auto fit = fit_power_law(pts);
      out.push_back({"seed" + std::to_string(key.first) + (key.second ? "_grokked" : "_ungrokked"), fit.exponent,
                     fit.r_squared, key.second});
    } catch (const Error&) {
    }
  }
  return out;
}

/// Predicts will-grok iff D <= threshold, for cohorts passing R^2 >= r2_gate.
inline EarlyWarningReport early_warning_classify(std::span<const CohortD> cohorts, double threshold, double r2_gate = 0.95) {
  EarlyWarningReport rep;
  rep.threshold = threshold;
  rep.r2_gate = r2_gate;
  std::size_t classified = 0;
  for (const auto& c : cohorts) {
    EarlyWarningRow row{c.id, c.d, c.r_squared, c.grokked, c.d <= threshold, c.r_squared < r2_gate};
    rep.rows.push_back(row);
    if (row.gated_out) continue;
    ++classified;
    (c.grokked ? rep.n_grokked : rep.n_ungrokked)++;
    if (row.predicted_grok && c.grokked) ++rep.true_pos;
    else if (!row.predicted_grok && !c.grokked) ++rep.true_neg;
    else if (row.predicted_grok) ++rep.false_pos;
    else ++rep.false_neg;
  }
  rep.accuracy = classified ? static_cast<double>(rep.true_pos + rep.true_neg) / static_cast<double>(classified) : 0.0;
  return rep;
}

/// Threshold (midpoint between adjacent sorted D values, or beyond either end)
/// maximizing classification accuracy on gated cohorts. Ties keep the first.
inline double best_separating_threshold(std::span<const CohortD> cohorts, double r2_gate = 0.95) {
  std::vector<double> ds;
  for (const auto& c : cohorts) {
    if (c.r_squared >= r2_gate) ds.push_back(c.d);
  }
  if (ds.empty()) throw Error(ErrorCode::insufficient_data, "no cohort passes the fit-quality gate");
  std::sort(ds.begin(), ds.end());
  std::vector<double> candidates{ds.front() - 1.0};
  for (std::size_t i = 0; i + 1 < ds.size(); ++i) candidates.push_back(0.5 * (ds[i] + ds[i + 1]));
  candidates.push_back(ds.back() + 1.0);
  double best = candidates.front(), best_acc = -1.0;
  for (double th : candidates) {
    const double acc = early_warning_classify(cohorts, th, r2_gate).accuracy;
    if (acc > best_acc) {
      best_acc = acc;
      best = th;
    }
  }
  return best;
}

}  // namespace tdu
