#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "tdu/error.hpp"

namespace tdu {

/// Linear-interpolation percentile between order statistics.
///
/// With ascending order statistics x(1) <= ... <= x(n), the fractional rank is
/// r = 1 + (pct / 100) * (n - 1) and the result is
/// x(floor r) + frac(r) * (x(floor r + 1) - x(floor r)).
/// This is the same convention as numpy's default "linear" method.
/// `values` is reordered in place (selection, O(n)).
inline double percentile_inplace(std::span<double> values, double pct) {
  if (values.empty()) throw Error(ErrorCode::invalid_argument, "percentile of empty sequence");
  if (!(pct >= 0.0 && pct <= 100.0)) throw Error(ErrorCode::invalid_argument, "percentile must lie in [0, 100]");
  const std::size_t n = values.size();
  const double rank0 = (pct / 100.0) * static_cast<double>(n - 1);  // zero-based
  auto lo = static_cast<std::size_t>(std::floor(rank0));
  if (lo >= n - 1) {
    return *std::max_element(values.begin(), values.end());
  }
  const double frac = rank0 - static_cast<double>(lo);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
  const double a = values[lo];
  const double b = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
  return a + frac * (b - a);
}

inline double percentile(std::span<const double> values, double pct) {
  std::vector<double> copy(values.begin(), values.end());
  return percentile_inplace(copy, pct);
}

}  // namespace tdu
