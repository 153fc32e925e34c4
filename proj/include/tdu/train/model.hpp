#pragma once

// Pieces shared by the two hand-differentiated models.
//
// Models keep their trainable scalars in one flat vector of `Real` (float for
// training, double for gradient checks). The flat order is the canonical
// flattening: node i of the probe graph is params()[i]. Forward and backward
// passes always run in double.

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tdu/error.hpp"
#include "tdu/rng.hpp"

namespace tdu {

struct ParamBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const noexcept { return rows * cols; }
};

struct StepResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;

namespace detail {

class LayoutBuilder {
 public:
  std::size_t add(std::string name, std::size_t rows, std::size_t cols) {
    blocks_.push_back({std::move(name), total_, rows, cols});
    total_ += rows * cols;
    return blocks_.size() - 1;
  }
  std::vector<ParamBlock> take() { return std::move(blocks_); }
  std::size_t total() const noexcept { return total_; }

 private:
  std::vector<ParamBlock> blocks_;
  std::size_t total_ = 0;
};

/// Row-wise softmax cross-entropy. Writes d(mean loss)/d(logits) into
/// `dlogits` when non-null. Predicted class is the first index attaining the
/// maximum logit.
inline StepResult softmax_xent(const RowMat& logits, std::span<const std::uint32_t> labels, RowMat* dlogits) {
  const auto b = logits.rows();
  const auto c = logits.cols();
  if (dlogits) dlogits->resize(b, c);
  double loss = 0.0;
  std::size_t correct = 0;
  for (Eigen::Index r = 0; r < b; ++r) {
    Eigen::Index arg = 0;
    double mx = logits(r, 0);
    for (Eigen::Index k = 1; k < c; ++k) {
      if (logits(r, k) > mx) {
        mx = logits(r, k);
        arg = k;
      }
    }
    if (static_cast<std::uint32_t>(arg) == labels[r]) ++correct;
    double z = 0.0;
    for (Eigen::Index k = 0; k < c; ++k) z += std::exp(logits(r, k) - mx);
    const double log_z = std::log(z) + mx;
    loss += log_z - logits(r, labels[r]);
    if (dlogits) {
      for (Eigen::Index k = 0; k < c; ++k) {
        const double pk = std::exp(logits(r, k) - log_z);
        (*dlogits)(r, k) = (pk - (static_cast<std::uint32_t>(k) == labels[r] ? 1.0 : 0.0)) / static_cast<double>(b);
      }
    }
  }
  if (!std::isfinite(loss)) throw Error(ErrorCode::divergence, "non-finite loss");
  return {loss / static_cast<double>(b), static_cast<double>(correct) / static_cast<double>(b)};
}

template <class Real>
void init_uniform(std::span<Real> dst, Rng& rng, double bound) {
  for (auto& v : dst) v = static_cast<Real>(rng.uniform(-bound, bound));
}

}  // namespace detail

}  // namespace tdu
