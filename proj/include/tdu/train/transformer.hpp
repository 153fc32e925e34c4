#pragma once

// One-layer pre-norm Transformer encoder for ModAdd-p.
//
// Input sequence (a, b) of two tokens with learned positional embeddings.
// Only the last token's output feeds the classification head, so the query,
// residual stream and MLP are evaluated for token 1 only; token 0 contributes
// keys and values. The result is identical to running the full encoder and
// reading the last position.
//
//   x_j  = E[tok_j] + P[j]
//   u_j  = LN1(x_j)
//   h    = x_1 + Attn(u_1 | u_0, u_1)          (n_heads heads, softmax over 2 keys)
//   y    = h + W2 gelu(W1 LN2(h) + b1) + b2
//   out  = LNf(y) Wu + bu                      (p logits)
//
// Flattening order (row-major, y = x W + b):
//   tok_embed[p x d] pos_embed[2 x d] ln1.g[d] ln1.b[d]
//   wq[d x d] bq[d] wk[d x d] bk[d] wv[d x d] bv[d] wo[d x d] bo[d]
//   ln2.g[d] ln2.b[d] w1[d x f] b1[f] w2[f x d] b2[d]
//   lnf.g[d] lnf.b[d] wu[d x p] bu[p]                      with f = ff_multiplier * d

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "tdu/config.hpp"
#include "tdu/train/dataset.hpp"
#include "tdu/train/model.hpp"

namespace tdu {

namespace detail {

struct LayerNormCache {
  RowMat xhat;
  Eigen::VectorXd rstd;
};

inline constexpr double kLayerNormEps = 1e-5;

inline RowMat layer_norm(const RowMat& x, const double* gain, const double* bias, LayerNormCache& cache) {
  const auto d = x.cols();
  cache.xhat.resize(x.rows(), d);
  cache.rstd.resize(x.rows());
  RowMat y(x.rows(), d);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    const double rstd = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.rstd(r) = rstd;
    for (Eigen::Index c = 0; c < d; ++c) {
      const double xh = (x(r, c) - mean) * rstd;
      cache.xhat(r, c) = xh;
      y(r, c) = xh * gain[c] + bias[c];
    }
  }
  return y;
}

/// Accumulates gain/bias gradients, returns dL/dx.
inline RowMat layer_norm_backward(const RowMat& dy, const double* gain, const LayerNormCache& cache, double* dgain,
                                  double* dbias) {
  const auto d = dy.cols();
  RowMat dx(dy.rows(), d);
  std::vector<double> dxhat(static_cast<std::size_t>(d));
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
    for (Eigen::Index c = 0; c < d; ++c) {
      dgain[c] += dy(r, c) * cache.xhat(r, c);
      dbias[c] += dy(r, c);
      dxhat[c] = dy(r, c) * gain[c];
      mean_dxhat += dxhat[c];
      mean_dxhat_xhat += dxhat[c] * cache.xhat(r, c);
    }
    mean_dxhat /= static_cast<double>(d);
    mean_dxhat_xhat /= static_cast<double>(d);
    for (Eigen::Index c = 0; c < d; ++c) {
      dx(r, c) = cache.rstd(r) * (dxhat[c] - mean_dxhat - cache.xhat(r, c) * mean_dxhat_xhat);
    }
  }
  return dx;
}

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

inline double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

}  // namespace detail

template <class Real = float>
class ModAddTransformer {
 public:
  enum Block : std::size_t {
    kTok, kPos, kLn1G, kLn1B, kWq, kBq, kWk, kBk, kWv, kBv, kWo, kBo,
    kLn2G, kLn2B, kW1, kB1, kW2, kB2, kLnfG, kLnfB, kWu, kBu, kNumBlocks
  };

  ModAddTransformer(std::uint32_t p, const ModelSpec& spec)
      : p_(p), d_(spec.d_model), heads_(spec.n_heads), ff_(spec.ff_multiplier * spec.d_model) {
    if (p < 2) throw Error(ErrorCode::invalid_argument, "modulus must be >= 2");
    if (spec.n_layers != 1) throw Error(ErrorCode::invalid_argument, "only single-layer encoders are supported");
    if (d_ == 0 || heads_ == 0 || d_ % heads_ != 0) {
      throw Error(ErrorCode::invalid_argument, "d_model must be a positive multiple of n_heads");
    }
    if (ff_ == 0) throw Error(ErrorCode::invalid_argument, "ff_multiplier must be >= 1");
    detail::LayoutBuilder lb;
    lb.add("tok_embed", p_, d_);
    lb.add("pos_embed", 2, d_);
    lb.add("ln1.gain", 1, d_);
    lb.add("ln1.bias", 1, d_);
    for (const char* nm : {"q", "k", "v", "o"}) {
      lb.add(std::string("attn.w") + nm, d_, d_);
      lb.add(std::string("attn.b") + nm, 1, d_);
    }
    lb.add("ln2.gain", 1, d_);
    lb.add("ln2.bias", 1, d_);
    lb.add("ffn.w1", d_, ff_);
    lb.add("ffn.b1", 1, ff_);
    lb.add("ffn.w2", ff_, d_);
    lb.add("ffn.b2", 1, d_);
    lb.add("lnf.gain", 1, d_);
    lb.add("lnf.bias", 1, d_);
    lb.add("head.w", d_, p_);
    lb.add("head.b", 1, p_);
    params_.assign(lb.total(), Real{0});
    layout_ = lb.take();
  }

  static std::size_t count_params(std::uint32_t p, const ModelSpec& spec) {
    const std::size_t d = spec.d_model, f = static_cast<std::size_t>(spec.ff_multiplier) * spec.d_model;
    return p * d + 2 * d + 2 * d + 4 * (d * d + d) + 2 * d + (d * f + f) + (f * d + d) + 2 * d + (d * p + p);
  }

  std::size_t param_count() const noexcept { return params_.size(); }
  std::span<Real> params() noexcept { return params_; }
  std::span<const Real> params() const noexcept { return params_; }
  const std::vector<ParamBlock>& layout() const noexcept { return layout_; }

  /// Embeddings U(-s, s); linear weights U(-s/sqrt(fan_in), s/sqrt(fan_in));
  /// biases 0; layer-norm gains 1 and biases 0.
  void init(std::uint64_t seed, double scale) {
    Rng rng(derive_seed(seed, {kTagInit}));
    auto p = std::span<Real>(params_);
    auto blk = [&](Block b) { return p.subspan(layout_[b].offset, layout_[b].size()); };
    std::fill(p.begin(), p.end(), Real{0});
    detail::init_uniform(blk(kTok), rng, scale);
    detail::init_uniform(blk(kPos), rng, scale);
    const double lin_d = scale / std::sqrt(static_cast<double>(d_));
    for (Block b : {kWq, kWk, kWv, kWo, kW1}) detail::init_uniform(blk(b), rng, lin_d);
    detail::init_uniform(blk(kW2), rng, scale / std::sqrt(static_cast<double>(ff_)));
    detail::init_uniform(blk(kWu), rng, lin_d);
    for (Block b : {kLn1G, kLn2G, kLnfG}) std::fill(blk(b).begin(), blk(b).end(), Real{1});
  }

  StepResult forward_backward(const Dataset& data, std::span<const std::uint32_t> batch, std::span<double> grad) const {
    if (grad.size() != params_.size()) throw Error(ErrorCode::dimension_mismatch, "gradient buffer size");
    return run(data, batch, grad.data());
  }

  StepResult evaluate(const Dataset& data, std::span<const std::uint32_t> batch) const {
    return run(data, batch, nullptr);
  }

 private:
  using CMap = Eigen::Map<const RowMat>;
  using Map = Eigen::Map<RowMat>;
  using CVec = Eigen::Map<const RowVec>;

  CMap mat(const std::vector<double>& w, Block b) const {
    return CMap(w.data() + layout_[b].offset, static_cast<Eigen::Index>(layout_[b].rows),
                static_cast<Eigen::Index>(layout_[b].cols));
  }
  CVec vec(const std::vector<double>& w, Block b) const {
    return CVec(w.data() + layout_[b].offset, static_cast<Eigen::Index>(layout_[b].size()));
  }
  Map gmat(double* g, Block b) const {
    return Map(g + layout_[b].offset, static_cast<Eigen::Index>(layout_[b].rows), static_cast<Eigen::Index>(layout_[b].cols));
  }
  Eigen::Map<RowVec> gvec(double* g, Block b) const {
    return Eigen::Map<RowVec>(g + layout_[b].offset, static_cast<Eigen::Index>(layout_[b].size()));
  }
  const double* ptr(const std::vector<double>& w, Block b) const { return w.data() + layout_[b].offset; }

  StepResult run(const Dataset& data, std::span<const std::uint32_t> batch, double* g) const {
    if (batch.empty()) throw Error(ErrorCode::invalid_argument, "empty batch");
    const std::vector<double> w(params_.begin(), params_.end());
    const auto B = static_cast<Eigen::Index>(batch.size());
    const auto D = static_cast<Eigen::Index>(d_);
    const auto H = static_cast<Eigen::Index>(heads_);
    const Eigen::Index dh = D / H;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    std::vector<std::uint32_t> tok0(batch.size()), tok1(batch.size()), labels(batch.size());
    for (std::size_t r = 0; r < batch.size(); ++r) {
      tok0[r] = data.inputs[batch[r]][0];
      tok1[r] = data.inputs[batch[r]][1];
      labels[r] = data.labels[batch[r]];
      if (tok0[r] >= p_ || tok1[r] >= p_) throw Error(ErrorCode::invalid_argument, "token id out of range");
    }

    const CMap tok = mat(w, kTok), pos = mat(w, kPos);
    RowMat x0(B, D), x1(B, D);
    for (Eigen::Index r = 0; r < B; ++r) {
      x0.row(r) = tok.row(tok0[r]) + pos.row(0);
      x1.row(r) = tok.row(tok1[r]) + pos.row(1);
    }

    detail::LayerNormCache ln1c0, ln1c1, ln2c, lnfc;
    const RowMat u0 = detail::layer_norm(x0, ptr(w, kLn1G), ptr(w, kLn1B), ln1c0);
    const RowMat u1 = detail::layer_norm(x1, ptr(w, kLn1G), ptr(w, kLn1B), ln1c1);

    RowMat q = u1 * mat(w, kWq);
    q.rowwise() += vec(w, kBq);
    RowMat k0 = u0 * mat(w, kWk), k1 = u1 * mat(w, kWk);
    k0.rowwise() += vec(w, kBk);
    k1.rowwise() += vec(w, kBk);
    RowMat v0 = u0 * mat(w, kWv), v1 = u1 * mat(w, kWv);
    v0.rowwise() += vec(w, kBv);
    v1.rowwise() += vec(w, kBv);

    RowMat a1(B, H);  // attention weight on key 1; weight on key 0 is 1 - a1
    RowMat o(B, D);
    for (Eigen::Index hh = 0; hh < H; ++hh) {
      const Eigen::Index c0 = hh * dh;
      for (Eigen::Index r = 0; r < B; ++r) {
        const double s0 = q.row(r).segment(c0, dh).dot(k0.row(r).segment(c0, dh)) * scale;
        const double s1 = q.row(r).segment(c0, dh).dot(k1.row(r).segment(c0, dh)) * scale;
        const double w1 = 1.0 / (1.0 + std::exp(s0 - s1));
        a1(r, hh) = w1;
        o.row(r).segment(c0, dh) = (1.0 - w1) * v0.row(r).segment(c0, dh) + w1 * v1.row(r).segment(c0, dh);
      }
    }
    RowMat att = o * mat(w, kWo);
    att.rowwise() += vec(w, kBo);
    const RowMat h1 = x1 + att;

    const RowMat z = detail::layer_norm(h1, ptr(w, kLn2G), ptr(w, kLn2B), ln2c);
    RowMat pre = z * mat(w, kW1);
    pre.rowwise() += vec(w, kB1);
    const RowMat act = pre.unaryExpr([](double v) { return detail::gelu(v); });
    RowMat y = act * mat(w, kW2);
    y.rowwise() += vec(w, kB2);
    y += h1;

    const RowMat yf = detail::layer_norm(y, ptr(w, kLnfG), ptr(w, kLnfB), lnfc);
    RowMat logits = yf * mat(w, kWu);
    logits.rowwise() += vec(w, kBu);

    RowMat dlogits;
    const StepResult res = detail::softmax_xent(logits, labels, g ? &dlogits : nullptr);
    if (!g) return res;

    std::fill(g, g + params_.size(), 0.0);
    gmat(g, kWu).noalias() += yf.transpose() * dlogits;
    gvec(g, kBu) += dlogits.colwise().sum();
    const RowMat dyf = dlogits * mat(w, kWu).transpose();
    const RowMat dy = detail::layer_norm_backward(dyf, ptr(w, kLnfG), lnfc, g + layout_[kLnfG].offset,
                                                  g + layout_[kLnfB].offset);

    // MLP branch
    gmat(g, kW2).noalias() += act.transpose() * dy;
    gvec(g, kB2) += dy.colwise().sum();
    RowMat dpre = dy * mat(w, kW2).transpose();
    for (Eigen::Index r = 0; r < B; ++r) {
      for (Eigen::Index c = 0; c < dpre.cols(); ++c) dpre(r, c) *= detail::gelu_grad(pre(r, c));
    }
    gmat(g, kW1).noalias() += z.transpose() * dpre;
    gvec(g, kB1) += dpre.colwise().sum();
    const RowMat dz = dpre * mat(w, kW1).transpose();
    const RowMat dh1 = dy + detail::layer_norm_backward(dz, ptr(w, kLn2G), ln2c, g + layout_[kLn2G].offset,
                                                        g + layout_[kLn2B].offset);

    // attention branch
    gmat(g, kWo).noalias() += o.transpose() * dh1;
    gvec(g, kBo) += dh1.colwise().sum();
    const RowMat d_o = dh1 * mat(w, kWo).transpose();
    RowMat dq(B, D), dk0(B, D), dk1(B, D), dv0(B, D), dv1(B, D);
    for (Eigen::Index hh = 0; hh < H; ++hh) {
      const Eigen::Index c0 = hh * dh;
      for (Eigen::Index r = 0; r < B; ++r) {
        const double w1 = a1(r, hh), w0 = 1.0 - w1;
        const auto dor = d_o.row(r).segment(c0, dh);
        const double da0 = dor.dot(v0.row(r).segment(c0, dh));
        const double da1 = dor.dot(v1.row(r).segment(c0, dh));
        dv0.row(r).segment(c0, dh) = w0 * dor;
        dv1.row(r).segment(c0, dh) = w1 * dor;
        const double ds1 = w0 * w1 * (da1 - da0);
        const double ds0 = -ds1;
        dq.row(r).segment(c0, dh) = scale * (ds0 * k0.row(r).segment(c0, dh) + ds1 * k1.row(r).segment(c0, dh));
        dk0.row(r).segment(c0, dh) = (scale * ds0) * q.row(r).segment(c0, dh);
        dk1.row(r).segment(c0, dh) = (scale * ds1) * q.row(r).segment(c0, dh);
      }
    }
    gmat(g, kWq).noalias() += u1.transpose() * dq;
    gvec(g, kBq) += dq.colwise().sum();
    gmat(g, kWk).noalias() += u0.transpose() * dk0;
    gmat(g, kWk).noalias() += u1.transpose() * dk1;
    gvec(g, kBk) += dk0.colwise().sum() + dk1.colwise().sum();
    gmat(g, kWv).noalias() += u0.transpose() * dv0;
    gmat(g, kWv).noalias() += u1.transpose() * dv1;
    gvec(g, kBv) += dv0.colwise().sum() + dv1.colwise().sum();

    RowMat du1 = dq * mat(w, kWq).transpose();
    du1.noalias() += dk1 * mat(w, kWk).transpose();
    du1.noalias() += dv1 * mat(w, kWv).transpose();
    RowMat du0 = dk0 * mat(w, kWk).transpose();
    du0.noalias() += dv0 * mat(w, kWv).transpose();

    double* gl1g = g + layout_[kLn1G].offset;
    double* gl1b = g + layout_[kLn1B].offset;
    const RowMat dx0 = detail::layer_norm_backward(du0, ptr(w, kLn1G), ln1c0, gl1g, gl1b);
    const RowMat dx1 = dh1 + detail::layer_norm_backward(du1, ptr(w, kLn1G), ln1c1, gl1g, gl1b);

    Map gtok = gmat(g, kTok);
    Map gpos = gmat(g, kPos);
    for (Eigen::Index r = 0; r < B; ++r) {
      gtok.row(tok0[r]) += dx0.row(r);
      gtok.row(tok1[r]) += dx1.row(r);
    }
    gpos.row(0) += dx0.colwise().sum();
    gpos.row(1) += dx1.colwise().sum();
    return res;
  }

  std::uint32_t p_;
  std::uint32_t d_;
  std::uint32_t heads_;
  std::uint32_t ff_;
  std::vector<Real> params_;
  std::vector<ParamBlock> layout_;
};

}  // namespace tdu
