#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tdu/config.hpp"
#include "tdu/error.hpp"

namespace tdu {

struct EpochStats {
  std::string run_id;
  std::uint32_t epoch = 0;
  std::uint64_t s_max = 0;
  double s_avg = 0.0;
  std::uint64_t s_epoch = 0;
  std::uint32_t n_batches = 0;
  double truncation_rate = 0.0;
};

enum class Observable { s_max, s_avg, s_epoch };

inline double observe(const EpochStats& e, Observable o) noexcept {
  switch (o) {
    case Observable::s_max: return static_cast<double>(e.s_max);
    case Observable::s_avg: return e.s_avg;
    case Observable::s_epoch: return static_cast<double>(e.s_epoch);
  }
  return 0.0;
}

inline Observable parse_observable(std::string_view s) {
  if (s == "s_max") return Observable::s_max;
  if (s == "s_avg") return Observable::s_avg;
  if (s == "s_epoch") return Observable::s_epoch;
  throw Error(ErrorCode::invalid_argument, "unknown observable '" + std::string(s) + "'");
}

/// One EpochStats per epoch present in the records (any order accepted).
/// Records may come from several files of the same run.
inline std::vector<EpochStats> aggregate_epochs(std::span<const AvalancheRecord> records) {
  std::vector<const AvalancheRecord*> sorted;
  sorted.reserve(records.size());
  for (const auto& r : records) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(), [](const AvalancheRecord* a, const AvalancheRecord* b) {
    return std::pair(a->epoch, a->batch) < std::pair(b->epoch, b->batch);
  });
  std::vector<EpochStats> out;
  std::uint64_t truncated = 0;
  auto close = [&] {
    if (out.empty()) return;
    auto& e = out.back();
    e.s_avg = static_cast<double>(e.s_epoch) / static_cast<double>(e.n_batches);
    e.truncation_rate = static_cast<double>(truncated) / static_cast<double>(e.n_batches);
  };
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const auto& r = *sorted[i];
    if (i > 0) {
      const auto& prev = *sorted[i - 1];
      if (prev.epoch == r.epoch && prev.batch == r.batch) {
        throw Error(ErrorCode::data_integrity,
                    "duplicate record for epoch " + std::to_string(r.epoch) + " batch " + std::to_string(r.batch));
      }
      if (prev.run_id != r.run_id) throw Error(ErrorCode::data_integrity, "records from different runs mixed");
    }
    if (out.empty() || out.back().epoch != r.epoch) {
      close();
      out.push_back({r.run_id, r.epoch, 0, 0.0, 0, 0, 0.0});
      truncated = 0;
    }
    auto& e = out.back();
    e.s_max = std::max(e.s_max, r.size);
    e.s_epoch += r.size;
    ++e.n_batches;
    if (r.truncated) ++truncated;
  }
  close();
  return out;
}

/// Per-run epoch statistics plus the identity needed for scaling analyses.
struct RunSeries {
  std::string run_id;
  double n_params = 0.0;
  std::optional<std::uint32_t> grok_epoch;
  RunStatus status = RunStatus::unknown;
  std::uint64_t seed = 0;
  std::vector<EpochStats> epochs;
};

struct ScaleData {
  double n_params = 0.0;
  std::vector<RunSeries> runs;
};

/// Groups runs by parameter count, ascending.
inline std::vector<ScaleData> group_by_scale(std::span<const RunSeries> runs) {
  std::map<double, ScaleData> by_n;
  for (const auto& r : runs) {
    auto& s = by_n[r.n_params];
    s.n_params = r.n_params;
    s.runs.push_back(r);
  }
  std::vector<ScaleData> out;
  for (auto& [n, s] : by_n) out.push_back(std::move(s));
  return out;
}

struct AlignedEpoch {
  double t = 0.0;
  EpochStats stats;
};

struct AlignedSeries {
  std::string run_id;
  double n_params = 0.0;
  std::uint32_t grok_epoch = 0;
  std::vector<AlignedEpoch> points;
};

/// t = (epoch - g) / g.
inline AlignedSeries align_to_grokking(std::span<const EpochStats> epochs, std::uint32_t g, double n_params = 0.0) {
  if (g < 1) throw Error(ErrorCode::invalid_argument, "grokking epoch must be >= 1 for alignment");
  AlignedSeries s;
  s.grok_epoch = g;
  s.n_params = n_params;
  if (!epochs.empty()) s.run_id = epochs.front().run_id;
  s.points.reserve(epochs.size());
  const double gd = static_cast<double>(g);
  for (const auto& e : epochs) s.points.push_back({(static_cast<double>(e.epoch) - gd) / gd, e});
  return s;
}

inline AlignedSeries align_run(const RunSeries& r) {
  if (!r.grok_epoch) {
    throw Error(ErrorCode::insufficient_data,
                "run '" + r.run_id + "' has no grokking epoch; grokking-aligned analyses need one");
  }
  return align_to_grokking(r.epochs, *r.grok_epoch, r.n_params);
}

}  // namespace tdu
