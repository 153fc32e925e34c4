#pragma once

#include "tdu/analysis/ccdf.hpp"
#include "tdu/analysis/controls.hpp"
#include "tdu/analysis/epochs.hpp"
#include "tdu/analysis/fit.hpp"
#include "tdu/analysis/fss.hpp"
#include "tdu/store.hpp"

namespace tdu {

inline RunSeries run_series_from(const RunData& run) {
  RunSeries s;
  s.run_id = run.manifest.run_id;
  s.n_params = static_cast<double>(run.manifest.n_params);
  s.grok_epoch = run.manifest.grok_epoch;
  s.status = run.manifest.status;
  s.seed = run.manifest.spec.train.seed;
  s.epochs = aggregate_epochs(run.records);
  return s;
}

inline RunSeries run_series_from(const RunManifest& m, std::span<const AvalancheRecord> records) {
  RunSeries s;
  s.run_id = m.run_id;
  s.n_params = static_cast<double>(m.n_params);
  s.grok_epoch = m.grok_epoch;
  s.status = m.status;
  s.seed = m.spec.train.seed;
  s.epochs = aggregate_epochs(records);
  return s;
}

}  // namespace tdu
