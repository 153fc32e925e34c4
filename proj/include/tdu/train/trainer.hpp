#pragma once

// Deterministic training loop with the avalanche probe attached.
//
// Epoch numbering: training epochs are 1..max_epochs. Avalanche records carry
// the epoch in which their batch ran. Evaluation happens after epoch e when
// e % eval_every == 0, so the grokking epoch is always >= 1.
//
// The probe sees each batch gradient rounded to float32 (snapshot precision)
// and widened back to double, so probing a stored snapshot reproduces the live
// record exactly.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "tdu/cascade.hpp"
#include "tdu/config.hpp"
#include "tdu/graph.hpp"
#include "tdu/rng.hpp"
#include "tdu/store.hpp"
#include "tdu/train/dataset.hpp"
#include "tdu/train/mlp.hpp"
#include "tdu/train/optim.hpp"
#include "tdu/train/transformer.hpp"

namespace tdu {

struct TrainObserver {
  /// Called after every training epoch with the current parameters.
  std::function<void(std::uint32_t epoch, std::span<const float> params)> on_epoch_end;
  /// Called after every evaluation.
  std::function<void(const AccuracyPoint&)> on_eval;
};

struct RunOutput {
  RunManifest manifest;
  std::vector<AccuracyPoint> trace;
  std::vector<AvalancheRecord> records;
};

/// N for a spec, computed from the instantiated layout.
inline std::uint64_t count_params(const RunSpec& spec) {
  if (spec.task.kind == TaskKind::xor_task) return XorMlp<float>(spec.model.hidden_width, spec.model.activation).param_count();
  return ModAddTransformer<float>(spec.task.p, spec.model).param_count();
}

namespace detail {

struct TaskData {
  Dataset train;
  Dataset test;
  bool shared = false;  // xor: train and evaluation use the same four patterns
};

inline TaskData make_task_data(const TaskSpec& t) {
  if (t.kind == TaskKind::xor_task) return {build_xor_dataset(), build_xor_dataset(), true};
  auto split = build_modadd_dataset(t.p, t.train_fraction, t.split_seed);
  return {std::move(split.train), std::move(split.test), false};
}

template <class Model>
double dataset_accuracy(const Model& model, const Dataset& data, double* loss_out) {
  constexpr std::size_t kChunk = 1024;
  std::vector<std::uint32_t> idx;
  double correct = 0.0, loss = 0.0;
  for (std::size_t start = 0; start < data.size(); start += kChunk) {
    const std::size_t end = std::min(data.size(), start + kChunk);
    idx.resize(end - start);
    std::iota(idx.begin(), idx.end(), static_cast<std::uint32_t>(start));
    const StepResult r = model.evaluate(data, idx);
    correct += r.accuracy * static_cast<double>(idx.size());
    loss += r.loss * static_cast<double>(idx.size());
  }
  if (loss_out) *loss_out = loss / static_cast<double>(data.size());
  return correct / static_cast<double>(data.size());
}

template <class Model>
RunOutput train_loop(Model& model, const RunSpec& spec, const std::string& run_id,
                     const std::optional<std::filesystem::path>& out_dir, const TrainObserver& obs) {
  const TrainConfig& cfg = spec.train;
  if (cfg.batch_size < 1) throw Error(ErrorCode::invalid_argument, "batch_size must be >= 1");
  if (cfg.eval_every < 1) throw Error(ErrorCode::invalid_argument, "eval_every must be >= 1");
  if (cfg.probe_mode != ProbeMode::off) cfg.probe.validate();

  const TaskData data = make_task_data(spec.task);
  model.init(cfg.seed, spec.model.init_scale);
  const std::size_t n = model.param_count();

  RunOutput out;
  RunManifest& m = out.manifest;
  m.run_id = run_id;
  m.kind = "train";
  m.spec = spec;
  m.n_params = n;
  m.graph_attach_m = cfg.attach_m;
  m.graph_build_seed = graph_seed_for_run(cfg.seed);
  m.status = RunStatus::running;

  std::optional<ParamGraph> graph;
  if (cfg.probe_mode != ProbeMode::off) {
    graph = build_ba_graph(n, cfg.attach_m, m.graph_build_seed);
    m.graph_digest = graph_digest(*graph);
  }
  if (out_dir) {
    m.accuracy_trace_path = kTraceFile;
    if (graph) m.avalanche_record_path = kRecordFile;
    save_manifest(*out_dir, m);
  }

  Optimizer opt(cfg.optimizer, n);
  std::vector<double> grad(n), probe_in(n);
  std::vector<std::uint32_t> order(data.train.size());
  std::iota(order.begin(), order.end(), 0u);
  const std::size_t n_train = order.size();

  auto finish = [&] {
    if (!out_dir) return;
    save_trace(*out_dir / kTraceFile, out.trace);
    if (graph) save_records(*out_dir / kRecordFile, out.records);
    save_manifest(*out_dir, m);
  };

  std::uint32_t eval_count = 0;
  try {
    for (std::uint32_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
      const bool eval_now = epoch % cfg.eval_every == 0;
      const bool snap_now = out_dir && graph && eval_now && cfg.snapshot_every > 0 &&
                            (eval_count + 1) % cfg.snapshot_every == 0;
      if (n_train > cfg.batch_size) {
        Rng rng(derive_seed(cfg.seed, {kTagShuffle, epoch}));
        std::iota(order.begin(), order.end(), 0u);
        rng.shuffle(order.begin(), order.end());
      }
      std::uint32_t batch_idx = 0;
      for (std::size_t start = 0; start < n_train; start += cfg.batch_size, ++batch_idx) {
        const std::size_t end = std::min(n_train, start + cfg.batch_size);
        const std::span<const std::uint32_t> batch(order.data() + start, end - start);
        const StepResult step = model.forward_backward(data.train, batch, grad);
        for (double gval : grad) {
          if (!std::isfinite(gval)) throw Error(ErrorCode::divergence, "non-finite gradient");
        }
        (void)step;

        std::span<const double> direction = grad;
        CascadeResult cascade;
        if (graph) {
          for (std::size_t i = 0; i < n; ++i) probe_in[i] = static_cast<double>(static_cast<float>(grad[i]));
          cascade = probe_gradient(probe_in, *graph, cfg.probe);
          out.records.push_back({run_id, epoch, batch_idx, cascade.size, cascade.iterations_used, cascade.truncated,
                                 cascade.rotation_cos});
          if (snap_now) {
            GradientSnapshot s{epoch, batch_idx, std::vector<float>(probe_in.begin(), probe_in.end())};
            const std::string rel = snapshot_relpath(epoch, batch_idx);
            save_snapshot(*out_dir / rel, s);
            m.snapshot_paths.push_back(rel);
          }
          if (cfg.probe_mode == ProbeMode::on) direction = cascade.final_state;
        }
        opt.step(model.params(), direction);
      }
      if (obs.on_epoch_end) obs.on_epoch_end(epoch, std::span<const float>(model.params().data(), n));

      if (eval_now) {
        ++eval_count;
        AccuracyPoint pt;
        pt.epoch = epoch;
        pt.train_acc = dataset_accuracy(model, data.train, &pt.loss);
        pt.test_acc = data.shared ? pt.train_acc : dataset_accuracy(model, data.test, nullptr);
        if (!std::isfinite(pt.loss)) throw Error(ErrorCode::divergence, "non-finite loss at epoch " + std::to_string(epoch));
        out.trace.push_back(pt);
        if (obs.on_eval) obs.on_eval(pt);
        if (!m.grok_epoch && pt.test_acc > cfg.grok_threshold) m.grok_epoch = epoch;
      }
      if (m.grok_epoch && cfg.stop_after_t &&
          static_cast<double>(epoch) >= static_cast<double>(*m.grok_epoch) * (1.0 + *cfg.stop_after_t)) {
        break;
      }
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::divergence) throw;
    m.status = RunStatus::failed;
    m.failure = std::string(e.what()) + " (run " + run_id + ")";
    finish();
    return out;
  }
  m.status = m.grok_epoch ? RunStatus::grokked : RunStatus::ungrokked;
  finish();
  return out;
}

}  // namespace detail

/// Trains one run from scratch. With `out_dir`, writes the run directory.
inline RunOutput train_run(const RunSpec& spec, const std::string& run_id,
                           const std::optional<std::filesystem::path>& out_dir = std::nullopt,
                           const TrainObserver& obs = {}) {
  if (spec.task.kind == TaskKind::xor_task) {
    XorMlp<float> model(spec.model.hidden_width, spec.model.activation);
    return detail::train_loop(model, spec, run_id, out_dir, obs);
  }
  ModAddTransformer<float> model(spec.task.p, spec.model);
  return detail::train_loop(model, spec, run_id, out_dir, obs);
}

}  // namespace tdu
