#pragma once

// Thresholded diffusion update in the style of the Olami-Feder-Christensen
// model: components whose magnitude exceeds a fixed threshold fire, keep
// (1 - alpha) of their value and hand alpha * w_i / k_i to each of their k_i
// neighbours. The avalanche size is the number of firing events.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tdu/error.hpp"
#include "tdu/graph.hpp"
#include "tdu/percentile.hpp"

namespace tdu {

struct ProbeConfig {
  double alpha = 0.3;
  double threshold_percentile = 90.0;
  std::uint32_t max_iterations = 20;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::invalid_argument, "alpha must lie in (0, 1)");
    if (!(threshold_percentile > 0.0 && threshold_percentile < 100.0)) {
      throw Error(ErrorCode::invalid_argument, "threshold percentile must lie in (0, 100)");
    }
    if (max_iterations < 1) throw Error(ErrorCode::invalid_argument, "max_iterations must be >= 1");
  }

  friend bool operator==(const ProbeConfig&, const ProbeConfig&) = default;
};

struct CascadeResult {
  std::uint64_t size = 0;
  std::uint32_t iterations_used = 0;
  bool truncated = false;
  std::vector<double> final_state;
  double rotation_cos = 1.0;
  double rotation_deg = 0.0;
};

struct Rotation {
  double cos = 1.0;
  double degrees = 0.0;
};

namespace detail {

inline void require_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw Error(ErrorCode::non_finite_input, std::string(what) + " contains a non-finite value");
  }
}

}  // namespace detail

/// tau = linear-interpolation percentile of |g|.
inline double compute_threshold(std::span<const double> grad, double percentile_value) {
  if (grad.empty()) throw Error(ErrorCode::invalid_argument, "empty gradient");
  if (!(percentile_value > 0.0 && percentile_value < 100.0)) {
    throw Error(ErrorCode::invalid_argument, "threshold percentile must lie in (0, 100)");
  }
  std::vector<double> mags(grad.size());
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) throw Error(ErrorCode::non_finite_input, "gradient contains a non-finite value");
    mags[i] = std::abs(grad[i]);
  }
  return percentile_inplace(mags, percentile_value);
}

/// Angle between two vectors. Empty optional when either vector is all-zero.
inline std::optional<Rotation> measure_rotation(std::span<const double> in, std::span<const double> out) {
  if (in.size() != out.size()) throw Error(ErrorCode::dimension_mismatch, "rotation of vectors with different lengths");
  double dot = 0.0, nin = 0.0, nout = 0.0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    dot += in[i] * out[i];
    nin += in[i] * in[i];
    nout += out[i] * out[i];
  }
  if (nin == 0.0 || nout == 0.0) return std::nullopt;
  const double c = std::clamp(dot / (std::sqrt(nin) * std::sqrt(nout)), -1.0, 1.0);
  return Rotation{c, std::acos(c) * 180.0 / std::numbers::pi};
}

/// Runs one avalanche on a copy of `grad`.
///
/// Every iteration fires all nodes with |w_i| > tau at once, using the values
/// from before the iteration. Nodes still above tau fire again next
/// iteration. Per receiving node, contributions are accumulated in ascending
/// source-index order, so the result is bit-reproducible.
inline CascadeResult run_cascade(std::span<const double> grad, const ParamGraph& graph, const ProbeConfig& cfg, double tau) {
  cfg.validate();
  if (grad.size() != graph.n_nodes) {
    throw Error(ErrorCode::dimension_mismatch, "gradient length " + std::to_string(grad.size()) +
                                                   " != graph nodes " + std::to_string(graph.n_nodes));
  }
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw Error(ErrorCode::invalid_argument, "tau must be finite and >= 0");
  detail::require_finite(grad, "gradient");

  CascadeResult res;
  res.final_state.assign(grad.begin(), grad.end());
  auto& w = res.final_state;
  const std::size_t n = w.size();

  std::vector<double> delta(n, 0.0);
  std::vector<std::uint64_t> active;
  std::vector<std::uint64_t> touched;
  std::vector<unsigned char> is_touched(n, 0);

  for (std::uint32_t it = 0; it < cfg.max_iterations; ++it) {
    active.clear();
    for (std::size_t i = 0; i < n; ++i) {
      if (std::abs(w[i]) > tau) active.push_back(i);
    }
    if (active.empty()) break;

    touched.clear();
    auto touch = [&](std::uint64_t j) {
      if (!is_touched[j]) {
        is_touched[j] = 1;
        touched.push_back(j);
      }
    };
    // Sources are visited in ascending order, so each delta[j] receives its
    // terms in ascending source order (the self term sits at position j).
    for (auto i : active) {
      const double amount = cfg.alpha * w[i];
      const double share = cfg.alpha * w[i] / static_cast<double>(graph.degree(i));
      delta[i] -= amount;
      touch(i);
      for (auto j : graph.neighbors_of(i)) {
        delta[j] += share;
        touch(j);
      }
    }
    for (auto j : touched) {
      w[j] += delta[j];
      delta[j] = 0.0;
      is_touched[j] = 0;
    }
    res.size += active.size();
    res.iterations_used = it + 1;
  }
  if (res.iterations_used == cfg.max_iterations) {
    res.truncated = std::any_of(w.begin(), w.end(), [tau](double x) { return std::abs(x) > tau; });
  }

  if (auto rot = measure_rotation(grad, w)) {
    res.rotation_cos = rot->cos;
    res.rotation_deg = rot->degrees;
  }
  return res;
}

/// compute_threshold followed by run_cascade.
inline CascadeResult probe_gradient(std::span<const double> grad, const ParamGraph& graph, const ProbeConfig& cfg) {
  const double tau = compute_threshold(grad, cfg.threshold_percentile);
  return run_cascade(grad, graph, cfg, tau);
}

}  // namespace tdu
