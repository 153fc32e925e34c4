#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <utility>
#include <vector>

#include "tdu/error.hpp"
#include "tdu/rng.hpp"

namespace tdu {

/// Two integer inputs per example. For modadd they are token ids, for xor
/// they are the 0/1 input bits.
struct Dataset {
  std::vector<std::array<std::uint32_t, 2>> inputs;
  std::vector<std::uint32_t> labels;
  std::uint32_t n_classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
};

struct DatasetSplit {
  Dataset train;
  Dataset test;
};

/// All p^2 pairs (a, b) labelled (a + b) mod p, enumerated row-major, then
/// shuffled with Rng(derive_seed(split_seed, {kTagSplit, p})); the first
/// round(train_fraction * p^2) go to train.
inline DatasetSplit build_modadd_dataset(std::uint32_t p, double train_fraction, std::uint64_t split_seed) {
  if (p < 2) throw Error(ErrorCode::invalid_argument, "modulus must be >= 2");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorCode::invalid_argument, "train_fraction must lie in (0, 1)");
  }
  const std::size_t total = static_cast<std::size_t>(p) * p;
  std::vector<std::uint32_t> order(total);
  std::iota(order.begin(), order.end(), 0u);
  Rng rng(derive_seed(split_seed, {kTagSplit, p}));
  rng.shuffle(order.begin(), order.end());
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(total)));

  DatasetSplit out;
  out.train.n_classes = out.test.n_classes = p;
  for (std::size_t k = 0; k < total; ++k) {
    const std::uint32_t a = order[k] / p;
    const std::uint32_t b = order[k] % p;
    Dataset& dst = k < n_train ? out.train : out.test;
    dst.inputs.push_back({a, b});
    dst.labels.push_back((a + b) % p);
  }
  return out;
}

/// (0,0)->0, (0,1)->1, (1,0)->1, (1,1)->0.
inline Dataset build_xor_dataset() {
  Dataset d;
  d.n_classes = 2;
  d.inputs = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  d.labels = {0, 1, 1, 0};
  return d;
}

}  // namespace tdu
