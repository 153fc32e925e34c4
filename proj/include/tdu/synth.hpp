#pragma once

// Null baseline: i.i.d. Gaussian "gradients" probed exactly like training
// gradients, across scales and graph variants.

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tdu/analysis.hpp"
#include "tdu/cascade.hpp"
#include "tdu/graph.hpp"
#include "tdu/rng.hpp"

namespace tdu {

struct GraphVariant {
  std::uint64_t attach_m = 2;
  std::uint64_t build_seed = 0;
};

struct SynthSpec {
  std::vector<std::uint64_t> n_values{1000, 2000, 4000, 8000, 16000};
  std::uint32_t batches_per_epoch = 4;
  std::uint32_t epochs = 40;
  double sigma = 1.0;
  std::uint64_t seed = 0;
  std::vector<GraphVariant> graph_variants{{2, 1}, {2, 2}, {2, 3}};
  ProbeConfig probe;

  void validate() const {
    if (n_values.size() < 3) throw Error(ErrorCode::invalid_argument, "synthetic runs need >= 3 scales");
    if (!(sigma > 0.0)) throw Error(ErrorCode::invalid_argument, "sigma must be > 0");
    if (graph_variants.empty()) throw Error(ErrorCode::invalid_argument, "at least one graph variant required");
    if (batches_per_epoch < 1 || epochs < 1) throw Error(ErrorCode::invalid_argument, "need >= 1 epoch and batch");
    probe.validate();
  }
};

struct SynthCell {
  std::uint64_t n_params = 0;
  std::size_t variant = 0;
  GraphVariant graph;
  std::uint64_t graph_digest = 0;
  RunManifest manifest;
  std::vector<AvalancheRecord> records;
};

/// Gaussian draw for (seed, N, epoch, batch). Independent of the graph
/// variant, so variants see identical gradient streams.
inline std::vector<double> synthetic_gradient(std::uint64_t seed, std::uint64_t n, std::uint32_t epoch,
                                              std::uint32_t batch, double sigma) {
  Rng rng(derive_seed(seed, {kTagSynth, n, epoch, batch}));
  std::vector<double> g(n);
  for (auto& v : g) v = sigma * rng.normal();
  return g;
}

/// One cell per (scale, variant), records in the standard format.
inline std::vector<SynthCell> generate_synthetic_run(const SynthSpec& spec) {
  spec.validate();
  std::vector<SynthCell> cells;
  for (std::uint64_t n : spec.n_values) {
    for (std::size_t v = 0; v < spec.graph_variants.size(); ++v) {
      const auto& gv = spec.graph_variants[v];
      const ParamGraph graph = build_ba_graph(n, gv.attach_m, gv.build_seed);
      SynthCell cell;
      cell.n_params = n;
      cell.variant = v;
      cell.graph = gv;
      cell.graph_digest = graph_digest(graph);
      const std::string run_id = "synth_N" + std::to_string(n) + "_v" + std::to_string(v);
      auto& m = cell.manifest;
      m.run_id = run_id;
      m.kind = "synthetic";
      m.n_params = n;
      m.graph_attach_m = gv.attach_m;
      m.graph_build_seed = gv.build_seed;
      m.graph_digest = cell.graph_digest;
      m.status = RunStatus::unknown;
      m.spec.train.seed = spec.seed;
      m.spec.train.probe = spec.probe;
      m.spec.train.attach_m = gv.attach_m;
      for (std::uint32_t e = 1; e <= spec.epochs; ++e) {
        for (std::uint32_t b = 0; b < spec.batches_per_epoch; ++b) {
          const auto g = synthetic_gradient(spec.seed, n, e, b, spec.sigma);
          const CascadeResult c = probe_gradient(g, graph, spec.probe);
          cell.records.push_back({run_id, e, b, c.size, c.iterations_used, c.truncated, c.rotation_cos});
        }
      }
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

struct SynthVariantFit {
  std::size_t variant = 0;
  GraphVariant graph;
  ScalingFit fit;
  std::optional<BootstrapSummary> bootstrap;
};

struct SynthBaseline {
  std::vector<SynthVariantFit> variants;
  double mean_D = 0.0;
  double std_D = 0.0;
  double cv = 0.0;  // std / mean across variants (population std)
};

/// D_synth per graph variant (plug-in fit over all epochs) and its spread.
inline SynthBaseline summarize_synthetic(std::span<const SynthCell> cells, Observable obs = Observable::s_max,
                                         std::uint32_t n_resamples = 0, std::uint64_t boot_seed = 0) {
  std::size_t n_variants = 0;
  for (const auto& c : cells) n_variants = std::max(n_variants, c.variant + 1);
  SynthBaseline out;
  for (std::size_t v = 0; v < n_variants; ++v) {
    std::vector<RunSeries> runs;
    GraphVariant gv;
    for (const auto& c : cells) {
      if (c.variant != v) continue;
      gv = c.graph;
      runs.push_back(run_series_from(c.manifest, c.records));
    }
    const auto scales = group_by_scale(runs);
    const auto pools = all_epoch_pools(scales, obs);
    auto fit = plug_in_fit(pools);
    if (!fit) throw Error(ErrorCode::insufficient_data, "synthetic variant " + std::to_string(v) + " has < 3 scales");
    SynthVariantFit vf{v, gv, *fit, std::nullopt};
    if (n_resamples > 0) {
      BootstrapOptions opt;
      opt.n_resamples = n_resamples;
      opt.seed = boot_seed;
      opt.observable = obs;
      vf.bootstrap = bootstrap_pools(pools, Phase::synth, opt);
    }
    out.variants.push_back(std::move(vf));
  }
  double mean = 0.0;
  for (const auto& v : out.variants) mean += v.fit.exponent;
  mean /= static_cast<double>(out.variants.size());
  double var = 0.0;
  for (const auto& v : out.variants) var += (v.fit.exponent - mean) * (v.fit.exponent - mean);
  var /= static_cast<double>(out.variants.size());
  out.mean_D = mean;
  out.std_D = std::sqrt(var);
  out.cv = out.std_D / std::abs(mean);
  return out;
}

}  // namespace tdu
