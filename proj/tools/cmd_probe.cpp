#include "cli_common.hpp"

#include "tdu/train/trainer.hpp"

namespace cli {
namespace {

struct ProbeFlags {
  std::optional<double> alpha, percentile;
  std::optional<std::uint32_t> max_iter;
  std::optional<std::uint64_t> attach_m, graph_seed;
};

void add_probe_flags(CLI::App* cmd, ProbeFlags& f) {
  cmd->add_option("--alpha", f.alpha, "Redistribution fraction (default: the run's)");
  cmd->add_option("--percentile", f.percentile, "Threshold percentile (default: the run's)");
  cmd->add_option("--max-iter", f.max_iter, "Cascade iteration cap (default: the run's)");
  cmd->add_option("--attach-m", f.attach_m, "Graph edges per new node (default: the run's)");
  cmd->add_option("--graph-seed", f.graph_seed, "Graph build seed (default: the run's)");
}

struct Probed {
  fs::path file;
  std::size_t n = 0;
};

/// Probes the stored snapshots of a run and writes avalanches_<digest>.csv.
Probed probe_run_dir(const fs::path& dir, const ProbeFlags& f) {
  const auto run = tdu::load_run(dir);
  const auto& m = run.manifest;
  if (m.snapshot_paths.empty()) {
    throw tdu::Error(tdu::ErrorCode::insufficient_data,
                     dir.string() + " has no gradient snapshots; train with --snapshot-every or use `tdu ingest`");
  }
  tdu::ProbeConfig cfg = m.spec.train.probe;
  if (f.alpha) cfg.alpha = *f.alpha;
  if (f.percentile) cfg.threshold_percentile = *f.percentile;
  if (f.max_iter) cfg.max_iterations = *f.max_iter;
  cfg.validate();
  const std::uint64_t attach_m = f.attach_m.value_or(m.graph_attach_m);
  const std::uint64_t seed = f.graph_seed.value_or(m.graph_build_seed);
  const auto graph = tdu::build_ba_graph(m.n_params, attach_m, seed);
  std::vector<fs::path> snaps;
  for (const auto& s : m.snapshot_paths) snaps.push_back(dir / s);
  const auto records = tdu::probe_snapshots(snaps, graph, cfg, m.run_id);
  const fs::path file = dir / ("avalanches_" + tdu::probe_config_digest(cfg, attach_m, seed) + ".csv");
  tdu::save_records(file, records);
  return {file, records.size()};
}

}  // namespace

void register_probe(CLI::App& app) {
  {
    struct Args {
      std::vector<std::string> dirs;
      ProbeFlags flags;
    };
    auto a = std::make_shared<Args>();
    auto* cmd = app.add_subcommand("probe", "Re-probe stored gradient snapshots of run or ingested directories");
    cmd->footer(
        "Writes <run>/avalanches_<digest>.csv with the standard record columns, where <digest> names the\n"
        "probe configuration and graph. Analyses read it with --records avalanches_<digest>.csv.");
    cmd->add_option("dirs", a->dirs, "Run directories")->required();
    add_probe_flags(cmd, a->flags);
    cmd->callback([a] {
      for (const auto& d : a->dirs) {
        const auto r = probe_run_dir(d, a->flags);
        std::cout << r.file.string() << " (" << r.n << " records)" << std::endl;
      }
    });
  }
  {
    struct Args {
      std::string snapshots, out, run_id = "ingested", trace;
      std::optional<std::uint32_t> grok_epoch;
      std::uint64_t seed = 0;
      std::optional<std::uint64_t> build_seed;
      std::uint64_t attach_m = 2;
      double alpha = 0.3, percentile = 90.0, grok_threshold = 0.99;
      std::uint32_t max_iter = 20;
    };
    auto a = std::make_shared<Args>();
    auto* cmd = app.add_subcommand("ingest", "Turn a directory of external .tdug gradient snapshots into a run directory");
    cmd->footer(
        "Snapshot file: \"TDUG\", version byte 1, u64 N, u32 epoch, u32 batch, N x f32, all little-endian.\n"
        "Every snapshot must have the same N. The run directory gets manifest.json (kind \"ingested\"),\n"
        "snapshots/, and avalanches.csv probed with the given configuration.");
    cmd->add_option("snapshots", a->snapshots, "Directory scanned recursively for *.tdug")->required();
    cmd->add_option("--out", a->out, "Run directory (default: $TDU_OUTPUT_ROOT/<run id>)");
    cmd->add_option("--run-id", a->run_id, "Run id")->capture_default_str();
    cmd->add_option("--grok-epoch", a->grok_epoch, "Grokking epoch, if known");
    cmd->add_option("--trace", a->trace, "Accuracy trace CSV (epoch,train_acc,test_acc,loss) to copy and read g from");
    cmd->add_option("--grok-threshold", a->grok_threshold, "Threshold used with --trace")->capture_default_str();
    cmd->add_option("--seed", a->seed, "Run seed; the graph seed is derived from it")->capture_default_str();
    cmd->add_option("--graph-seed", a->build_seed, "Explicit graph build seed");
    cmd->add_option("--attach-m", a->attach_m, "Graph edges per new node")->capture_default_str();
    cmd->add_option("--alpha", a->alpha, "Redistribution fraction")->capture_default_str();
    cmd->add_option("--percentile", a->percentile, "Threshold percentile")->capture_default_str();
    cmd->add_option("--max-iter", a->max_iter, "Cascade iteration cap")->capture_default_str();
    cmd->callback([a] {
      tdu::ManifestStub stub;
      stub.run_id = a->run_id;
      stub.grok_epoch = a->grok_epoch;
      stub.seed = a->seed;
      stub.build_seed = a->build_seed;
      stub.attach_m = a->attach_m;
      stub.probe = tdu::ProbeConfig{a->alpha, a->percentile, a->max_iter};
      stub.probe.validate();
      auto res = tdu::ingest_external_snapshots(a->snapshots, stub);
      const fs::path dir = a->out.empty() ? output_root() / a->run_id : fs::path(a->out);
      auto& m = res.manifest;
      std::vector<fs::path> local;
      for (const auto& src : res.snapshots) {
        const auto h = [&] {
          std::ifstream in(src, std::ios::binary);
          return tdu::read_snapshot_header(in);
        }();
        const std::string rel = tdu::snapshot_relpath(h.epoch, h.batch);
        fs::create_directories((dir / rel).parent_path());
        fs::copy_file(src, dir / rel, fs::copy_options::overwrite_existing);
        m.snapshot_paths.push_back(rel);
        local.push_back(dir / rel);
      }
      if (!a->trace.empty()) {
        const auto trace = tdu::load_trace(a->trace);
        tdu::save_trace(dir / tdu::kTraceFile, trace);
        m.accuracy_trace_path = tdu::kTraceFile;
        if (!m.grok_epoch) m.grok_epoch = tdu::grok_epoch_from_trace(trace, a->grok_threshold);
        m.status = m.grok_epoch ? tdu::RunStatus::grokked : tdu::RunStatus::ungrokked;
      }
      const auto graph = tdu::build_ba_graph(m.n_params, m.graph_attach_m, m.graph_build_seed);
      m.graph_digest = tdu::graph_digest(graph);
      const auto records = tdu::probe_snapshots(local, graph, stub.probe, m.run_id);
      tdu::save_records(dir / tdu::kRecordFile, records);
      m.avalanche_record_path = tdu::kRecordFile;
      tdu::save_manifest(dir, m);
      std::cout << "ingested " << local.size() << " snapshots, N=" << m.n_params << "\n"
                << (dir / tdu::kManifestFile).string() << std::endl;
    });
  }
}

}  // namespace cli
