#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "tdu/config.hpp"
#include "tdu/train/dataset.hpp"
#include "tdu/train/model.hpp"

namespace tdu {

/// Two-layer MLP for XOR: 2 inputs -> hidden (tanh or relu) -> 2 logits.
///
/// Flattening order: w1 [hidden x 2], b1 [hidden], w2 [2 x hidden], b2 [2],
/// so N = 5 * hidden + 2.
template <class Real = float>
class XorMlp {
 public:
  XorMlp(std::uint32_t hidden, Activation act) : hidden_(hidden), act_(act) {
    if (hidden < 1) throw Error(ErrorCode::invalid_argument, "hidden width must be >= 1");
    detail::LayoutBuilder lb;
    lb.add("w1", hidden, 2);
    lb.add("b1", 1, hidden);
    lb.add("w2", 2, hidden);
    lb.add("b2", 1, 2);
    params_.assign(lb.total(), Real{0});
    layout_ = lb.take();
  }

  static std::size_t count_params(std::uint32_t hidden) noexcept { return 5 * static_cast<std::size_t>(hidden) + 2; }

  std::size_t param_count() const noexcept { return params_.size(); }
  std::span<Real> params() noexcept { return params_; }
  std::span<const Real> params() const noexcept { return params_; }
  const std::vector<ParamBlock>& layout() const noexcept { return layout_; }

  /// Weights U(-s/sqrt(fan_in), s/sqrt(fan_in)); biases likewise (fan_in of the layer).
  void init(std::uint64_t seed, double scale) {
    Rng rng(derive_seed(seed, {kTagInit}));
    auto p = std::span<Real>(params_);
    detail::init_uniform(p.subspan(layout_[0].offset, layout_[0].size()), rng, scale / std::sqrt(2.0));
    detail::init_uniform(p.subspan(layout_[1].offset, layout_[1].size()), rng, scale / std::sqrt(2.0));
    const double b2 = scale / std::sqrt(static_cast<double>(hidden_));
    detail::init_uniform(p.subspan(layout_[2].offset, layout_[2].size()), rng, b2);
    detail::init_uniform(p.subspan(layout_[3].offset, layout_[3].size()), rng, b2);
  }

  StepResult forward_backward(const Dataset& data, std::span<const std::uint32_t> batch, std::span<double> grad) const {
    return run(data, batch, &grad);
  }

  StepResult evaluate(const Dataset& data, std::span<const std::uint32_t> batch) const { return run(data, batch, nullptr); }

 private:
  StepResult run(const Dataset& data, std::span<const std::uint32_t> batch, std::span<double>* grad) const {
    if (batch.empty()) throw Error(ErrorCode::invalid_argument, "empty batch");
    const std::size_t h = hidden_;
    const auto b = static_cast<Eigen::Index>(batch.size());
    const Real* w1 = params_.data() + layout_[0].offset;
    const Real* b1 = params_.data() + layout_[1].offset;
    const Real* w2 = params_.data() + layout_[2].offset;
    const Real* b2 = params_.data() + layout_[3].offset;

    RowMat pre(b, h), act(b, h), logits(b, 2);
    std::vector<std::uint32_t> labels(batch.size());
    for (Eigen::Index r = 0; r < b; ++r) {
      const auto& in = data.inputs[batch[r]];
      labels[r] = data.labels[batch[r]];
      const double x0 = in[0], x1 = in[1];
      for (std::size_t j = 0; j < h; ++j) {
        const double z = double(w1[2 * j]) * x0 + double(w1[2 * j + 1]) * x1 + double(b1[j]);
        pre(r, j) = z;
        act(r, j) = act_ == Activation::tanh ? std::tanh(z) : (z > 0.0 ? z : 0.0);
      }
      for (int k = 0; k < 2; ++k) {
        double s = double(b2[k]);
        for (std::size_t j = 0; j < h; ++j) s += double(w2[k * h + j]) * act(r, j);
        logits(r, k) = s;
      }
    }
    RowMat dlogits;
    StepResult res = detail::softmax_xent(logits, labels, grad ? &dlogits : nullptr);
    if (!grad) return res;

    if (grad->size() != params_.size()) throw Error(ErrorCode::dimension_mismatch, "gradient buffer size");
    std::fill(grad->begin(), grad->end(), 0.0);
    double* gw1 = grad->data() + layout_[0].offset;
    double* gb1 = grad->data() + layout_[1].offset;
    double* gw2 = grad->data() + layout_[2].offset;
    double* gb2 = grad->data() + layout_[3].offset;
    for (Eigen::Index r = 0; r < b; ++r) {
      const auto& in = data.inputs[batch[r]];
      const double x0 = in[0], x1 = in[1];
      for (int k = 0; k < 2; ++k) gb2[k] += dlogits(r, k);
      for (std::size_t j = 0; j < h; ++j) {
        double da = 0.0;
        for (int k = 0; k < 2; ++k) {
          gw2[k * h + j] += dlogits(r, k) * act(r, j);
          da += dlogits(r, k) * double(w2[k * h + j]);
        }
        const double dz = act_ == Activation::tanh ? da * (1.0 - act(r, j) * act(r, j)) : (pre(r, j) > 0.0 ? da : 0.0);
        gw1[2 * j] += dz * x0;
        gw1[2 * j + 1] += dz * x1;
        gb1[j] += dz;
      }
    }
    return res;
  }

  std::uint32_t hidden_;
  Activation act_;
  std::vector<Real> params_;
  std::vector<ParamBlock> layout_;
};

}  // namespace tdu
