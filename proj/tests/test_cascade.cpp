#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>

#include "oracles.hpp"
#include "tdu/cascade.hpp"

namespace {

using tdu::ErrorCode;
using tdu::ProbeConfig;

tdu::ParamGraph star4() {
  const std::vector<std::pair<std::uint64_t, std::uint64_t>> e{{0, 1}, {0, 2}, {0, 3}, {0, 4}};
  return tdu::graph_from_edges(5, e);
}

std::vector<double> normal_vector(std::uint64_t seed, std::size_t n, double scale = 1.0) {
  tdu::Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

TEST(Threshold, Examples) {
  EXPECT_EQ(tdu::compute_threshold(std::vector<double>(17, 0.0), 90.0), 0.0);

  std::vector<double> ramp(100);
  std::iota(ramp.begin(), ramp.end(), 1.0);
  tdu::Rng rng(5);
  rng.shuffle(ramp.begin(), ramp.end());
  EXPECT_NEAR(tdu::compute_threshold(ramp, 90.0), 90.1, 1e-12);
  EXPECT_NEAR(tdu::compute_threshold(ramp, 90.0), oracle::percentile_sorted(ramp, 90.0), 1e-12);

  EXPECT_EQ(tdu::compute_threshold(std::vector<double>{-5.0, 5.0}, 90.0), 5.0);
}

TEST(Threshold, AgreesWithSortedOracle) {
  for (int trial = 0; trial < 50; ++trial) {
    tdu::Rng rng(100 + trial);
    const auto g = normal_vector(trial, 1 + rng.below(300));
    std::vector<double> mags(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) mags[i] = std::fabs(g[i]);
    const double p = 1.0 + 98.0 * rng.uniform();
    EXPECT_NEAR(tdu::compute_threshold(g, p), oracle::percentile_sorted(mags, p), 1e-12);
  }
}

TEST(Threshold, Errors) {
  auto code = [](std::vector<double> g, double p) {
    try {
      tdu::compute_threshold(g, p);
    } catch (const tdu::Error& e) {
      return e.code();
    }
    return ErrorCode::io;
  };
  EXPECT_EQ(code({}, 90.0), ErrorCode::invalid_argument);
  EXPECT_EQ(code({1.0, NAN}, 90.0), ErrorCode::non_finite_input);
  EXPECT_EQ(code({1.0, INFINITY}, 90.0), ErrorCode::non_finite_input);
  EXPECT_EQ(code({1.0}, 0.0), ErrorCode::invalid_argument);
  EXPECT_EQ(code({1.0}, 100.0), ErrorCode::invalid_argument);
}

TEST(Cascade, StarHandTrace) {
  const auto g = star4();
  const std::vector<double> grad{1.0, 0.01, 0.01, 0.01, 0.01};
  const auto r = tdu::run_cascade(grad, g, ProbeConfig{}, 0.5);
  EXPECT_EQ(r.size, 2u);
  EXPECT_EQ(r.iterations_used, 2u);
  EXPECT_FALSE(r.truncated);
  EXPECT_NEAR(r.final_state[0], 0.49, 1e-15);
  for (int leaf = 1; leaf <= 4; ++leaf) EXPECT_NEAR(r.final_state[leaf], 0.01 + 0.075 + 0.0525, 1e-15);
  EXPECT_EQ(grad[0], 1.0);
}

TEST(Cascade, ZeroGradient) {
  const auto g = tdu::build_ba_graph(30, 2, 1);
  const std::vector<double> zero(30, 0.0);
  for (double tau : {0.0, 1.0}) {
    const auto r = tdu::run_cascade(zero, g, ProbeConfig{}, tau);
    EXPECT_EQ(r.size, 0u);
    EXPECT_EQ(r.iterations_used, 0u);
    EXPECT_FALSE(r.truncated);
    EXPECT_EQ(r.rotation_cos, 1.0);
    EXPECT_EQ(r.rotation_deg, 0.0);
    EXPECT_EQ(r.final_state, zero);
  }
  EXPECT_EQ(tdu::probe_gradient(zero, g, ProbeConfig{}).size, 0u);
}

TEST(Cascade, TruncationFlag) {
  // tau = 0 keeps every nonzero node active, so the cap is always hit.
  const auto g = tdu::build_ba_graph(20, 2, 4);
  const auto grad = normal_vector(3, 20);
  ProbeConfig cfg;
  cfg.max_iterations = 5;
  const auto r = tdu::run_cascade(grad, g, cfg, 0.0);
  EXPECT_EQ(r.iterations_used, 5u);
  EXPECT_TRUE(r.truncated);
  EXPECT_EQ(r.size, 5u * 20u);
}

TEST(Cascade, MatchesDenseOracleExactly) {
  for (int trial = 0; trial < 60; ++trial) {
    tdu::Rng pick(1000 + trial);
    const std::uint64_t n = 3 + pick.below(198);
    const std::uint64_t m = 1 + pick.below(std::min<std::uint64_t>(3, n - 1));
    const auto g = tdu::build_ba_graph(n, m, pick());
    ProbeConfig cfg;
    cfg.alpha = 0.05 + 0.9 * pick.uniform();
    cfg.threshold_percentile = 50.0 + 49.0 * pick.uniform();
    const auto grad = normal_vector(pick(), n);
    const double tau = tdu::compute_threshold(grad, cfg.threshold_percentile);
    const auto r = tdu::run_cascade(grad, g, cfg, tau);
    const auto ref = oracle::dense_cascade(grad, oracle::dense_adjacency(g), cfg.alpha, tau, cfg.max_iterations);
    ASSERT_EQ(r.size, ref.size) << "trial " << trial;
    ASSERT_EQ(r.iterations_used, ref.iterations);
    ASSERT_EQ(r.truncated, ref.truncated);
    for (std::size_t i = 0; i < n; ++i) ASSERT_EQ(r.final_state[i], ref.w[i]) << "trial " << trial << " node " << i;
  }
}

TEST(Cascade, ConservesSumAndRespectsBounds) {
  for (int trial = 0; trial < 40; ++trial) {
    tdu::Rng pick(7000 + trial);
    const std::uint64_t n = 3 + pick.below(5000);
    const auto g = tdu::build_ba_graph(n, 2, pick());
    const auto grad = normal_vector(pick(), n, std::exp(6.0 * pick.uniform() - 3.0));
    const auto r = tdu::probe_gradient(grad, g, ProbeConfig{});
    double s_in = 0.0, s_out = 0.0, abs_in = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      s_in += grad[i];
      s_out += r.final_state[i];
      abs_in += std::fabs(grad[i]);
    }
    EXPECT_LE(std::fabs(s_out - s_in), 1e-6 * std::max(1.0, abs_in));
    EXPECT_LE(r.size, std::uint64_t{20} * n);
    EXPECT_EQ(r.size >= 1, r.iterations_used >= 1);
    EXPECT_GE(r.rotation_cos, -1.0);
    EXPECT_LE(r.rotation_cos, 1.0);
    EXPECT_NEAR(r.rotation_deg, std::acos(r.rotation_cos) * 180.0 / std::numbers::pi, 1e-9);
  }
}

TEST(Cascade, HigherThresholdShrinksFirstActiveSet) {
  const auto g = tdu::build_ba_graph(500, 2, 9);
  const auto grad = normal_vector(10, 500);
  ProbeConfig one;
  one.max_iterations = 1;
  std::uint64_t prev = ~std::uint64_t{0};
  for (double p : {10.0, 30.0, 50.0, 70.0, 90.0, 99.0}) {
    const double tau = tdu::compute_threshold(grad, p);
    const auto r = tdu::run_cascade(grad, g, one, tau);
    EXPECT_LE(r.size, prev);
    prev = r.size;
  }
}

TEST(Cascade, Deterministic) {
  const auto g = tdu::build_ba_graph(3000, 2, 2);
  const auto grad = normal_vector(11, 3000);
  const auto a = tdu::probe_gradient(grad, g, ProbeConfig{});
  const auto b = tdu::probe_gradient(grad, g, ProbeConfig{});
  EXPECT_EQ(a.size, b.size);
  EXPECT_EQ(a.final_state, b.final_state);
  EXPECT_EQ(a.rotation_cos, b.rotation_cos);
}

TEST(Cascade, Errors) {
  const auto g = star4();
  auto code = [&](std::vector<double> grad, ProbeConfig cfg, double tau) {
    try {
      tdu::run_cascade(grad, g, cfg, tau);
    } catch (const tdu::Error& e) {
      return e.code();
    }
    return ErrorCode::io;
  };
  EXPECT_EQ(code({1, 2, 3}, {}, 0.5), ErrorCode::dimension_mismatch);
  EXPECT_EQ(code({1, 2, 3, NAN, 0}, {}, 0.5), ErrorCode::non_finite_input);
  EXPECT_EQ(code({1, 2, 3, 4, 5}, {}, -1.0), ErrorCode::invalid_argument);
  EXPECT_EQ(code({1, 2, 3, 4, 5}, {1.0, 90.0, 20}, 0.5), ErrorCode::invalid_argument);
  EXPECT_EQ(code({1, 2, 3, 4, 5}, {0.3, 90.0, 0}, 0.5), ErrorCode::invalid_argument);
}

TEST(Rotation, Examples) {
  const std::vector<double> a{1.0, 0.0}, b{0.0, 1.0}, c{1.0, 1.0}, z{0.0, 0.0};
  auto same = tdu::measure_rotation(a, a);
  ASSERT_TRUE(same);
  EXPECT_EQ(same->cos, 1.0);
  EXPECT_EQ(same->degrees, 0.0);
  auto ortho = tdu::measure_rotation(a, b);
  EXPECT_NEAR(ortho->cos, 0.0, 1e-15);
  EXPECT_NEAR(ortho->degrees, 90.0, 1e-12);
  auto diag = tdu::measure_rotation(a, c);
  EXPECT_NEAR(diag->cos, std::sqrt(0.5), 1e-15);
  EXPECT_NEAR(diag->degrees, 45.0, 1e-12);
  EXPECT_FALSE(tdu::measure_rotation(a, z));
  EXPECT_THROW(tdu::measure_rotation(a, std::vector<double>{1.0}), tdu::Error);
}

}  // namespace
