#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "tdu/error.hpp"

namespace tdu {

/// Log-log least squares y ~ exp(intercept) * N^exponent.
struct ScalingFit {
  double exponent = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t n_points = 0;
  std::vector<double> residuals;  // ln y - fitted, in input order of surviving points
  double std_error = 0.0;         // OLS standard error of the slope
  std::size_t dropped = 0;        // points discarded for y <= 0 (or N <= 0)
};

/// Ordinary least squares of ln y on ln N. Points with y <= 0 are dropped and
/// counted in `dropped`; fewer than three survivors is an error.
inline ScalingFit fit_power_law(std::span<const std::pair<double, double>> points) {
  std::vector<double> lx, ly;
  ScalingFit fit;
  for (auto [n, y] : points) {
    if (!(n > 0.0) || !(y > 0.0) || !std::isfinite(n) || !std::isfinite(y)) {
      ++fit.dropped;
      continue;
    }
    lx.push_back(std::log(n));
    ly.push_back(std::log(y));
  }
  const std::size_t k = lx.size();
  if (k < 3) {
    throw Error(ErrorCode::insufficient_data,
                "power-law fit needs >= 3 points with positive values, got " + std::to_string(k));
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(k);
  my /= static_cast<double>(k);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (sxx <= 0.0) throw Error(ErrorCode::insufficient_data, "power-law fit needs >= 2 distinct scales");
  fit.exponent = sxy / sxx;
  fit.intercept = my - fit.exponent * mx;
  fit.n_points = k;
  double ss_res = 0.0;
  fit.residuals.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    fit.residuals[i] = ly[i] - (fit.intercept + fit.exponent * lx[i]);
    ss_res += fit.residuals[i] * fit.residuals[i];
  }
  fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  fit.std_error = std::sqrt(ss_res / static_cast<double>(k - 2) / sxx);
  return fit;
}

/// Geometric mean of the positive entries; empty if there are none.
inline std::optional<double> geometric_mean_positive(std::span<const double> values) {
  double acc = 0.0;
  std::size_t k = 0;
  for (double v : values) {
    if (v > 0.0) {
      acc += std::log(v);
      ++k;
    }
  }
  if (k == 0) return std::nullopt;
  return std::exp(acc / static_cast<double>(k));
}

}  // namespace tdu
