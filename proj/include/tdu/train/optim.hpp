#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "tdu/config.hpp"
#include "tdu/error.hpp"

namespace tdu {

/// SGD or Adam. State and arithmetic are double; the result is rounded to the
/// parameter type.
///
/// Weight decay never enters the probed gradient. Inside the optimizer it is
/// either an L2 term wd * p added to the step direction (default, the classic
/// Adam convention) or, with decoupled_decay, a separate shrink
/// p <- p - lr * wd * p before the step.
class Optimizer {
 public:
  Optimizer(const OptimizerConfig& cfg, std::size_t n) : cfg_(cfg) {
    if (!(cfg.lr > 0.0)) throw Error(ErrorCode::invalid_argument, "learning rate must be > 0");
    if (cfg.kind == OptimizerKind::adam) {
      m_.assign(n, 0.0);
      v_.assign(n, 0.0);
    }
  }

  template <class Real>
  void step(std::span<Real> params, std::span<const double> direction) {
    if (params.size() != direction.size()) throw Error(ErrorCode::dimension_mismatch, "optimizer step size mismatch");
    ++t_;
    const double lr = cfg_.lr;
    const double wd = cfg_.weight_decay;
    const double shrink = cfg_.decoupled_decay ? lr * wd : 0.0;
    const double l2 = cfg_.decoupled_decay ? 0.0 : wd;
    if (cfg_.kind == OptimizerKind::sgd) {
      for (std::size_t i = 0; i < params.size(); ++i) {
        double p = static_cast<double>(params[i]);
        const double g = direction[i] + l2 * p;
        p -= shrink * p;
        p -= lr * g;
        params[i] = static_cast<Real>(p);
      }
      return;
    }
    const double b1 = cfg_.beta1, b2 = cfg_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      double p = static_cast<double>(params[i]);
      const double g = direction[i] + l2 * p;
      m_[i] = b1 * m_[i] + (1.0 - b1) * g;
      v_[i] = b2 * v_[i] + (1.0 - b2) * g * g;
      p -= shrink * p;
      p -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + cfg_.eps);
      params[i] = static_cast<Real>(p);
    }
  }

  std::uint64_t steps() const noexcept { return t_; }

 private:
  OptimizerConfig cfg_;
  std::vector<double> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace tdu
