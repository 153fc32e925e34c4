#pragma once

// Run configuration and record types shared by the trainers, the store and
// the analysis code.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tdu/cascade.hpp"
#include "tdu/error.hpp"

namespace tdu {

enum class TaskKind { modadd, xor_task };
enum class Activation { relu, tanh };
enum class OptimizerKind { adam, sgd };
enum class ProbeMode { shadow, on, off };
enum class RunStatus { running, grokked, ungrokked, failed, unknown };

struct TaskSpec {
  TaskKind kind = TaskKind::xor_task;
  std::uint32_t p = 59;
  double train_fraction = 1.0;
  std::uint64_t split_seed = 0;
  friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

struct ModelSpec {
  // modadd transformer
  std::uint32_t d_model = 24;
  std::uint32_t n_heads = 4;
  std::uint32_t n_layers = 1;
  std::uint32_t ff_multiplier = 4;
  // xor mlp
  std::uint32_t hidden_width = 16;
  Activation activation = Activation::tanh;
  // weights ~ U(-s/sqrt(fan_in), s/sqrt(fan_in)), embeddings ~ U(-s, s)
  double init_scale = 1.0;
  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::sgd;
  double lr = 0.1;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // false: wd * p joins the optimizer's step direction (L2); true: AdamW-style shrink.
  bool decoupled_decay = false;
  friend bool operator==(const OptimizerConfig&, const OptimizerConfig&) = default;
};

struct TrainConfig {
  OptimizerConfig optimizer;
  std::uint32_t batch_size = 4;
  std::uint32_t max_epochs = 2000;
  std::uint32_t eval_every = 1;
  std::uint64_t seed = 0;
  ProbeMode probe_mode = ProbeMode::shadow;
  ProbeConfig probe;
  std::uint64_t attach_m = 2;
  double grok_threshold = 0.99;
  // 0 disables gradient snapshots; otherwise every k-th evaluated epoch.
  std::uint32_t snapshot_every = 0;
  // Stop once epoch >= g * (1 + stop_after_t). Absent: run to max_epochs.
  std::optional<double> stop_after_t;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct RunSpec {
  TaskSpec task;
  ModelSpec model;
  TrainConfig train;
  friend bool operator==(const RunSpec&, const RunSpec&) = default;
};

struct RunManifest {
  std::string run_id;
  std::string kind = "train";  // train | synthetic | ingested
  RunSpec spec;
  std::uint64_t n_params = 0;
  std::uint64_t graph_attach_m = 2;
  std::uint64_t graph_build_seed = 0;
  std::uint64_t graph_digest = 0;
  std::optional<std::uint32_t> grok_epoch;
  RunStatus status = RunStatus::running;
  std::string failure;
  std::string accuracy_trace_path;
  std::string avalanche_record_path;
  std::vector<std::string> snapshot_paths;
};

struct AvalancheRecord {
  std::string run_id;
  std::uint32_t epoch = 0;
  std::uint32_t batch = 0;
  std::uint64_t size = 0;
  std::uint32_t iterations = 0;
  bool truncated = false;
  double rotation_cos = 1.0;
  friend bool operator==(const AvalancheRecord&, const AvalancheRecord&) = default;
};

struct AccuracyPoint {
  std::uint32_t epoch = 0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double loss = 0.0;
  friend bool operator==(const AccuracyPoint&, const AccuracyPoint&) = default;
};

/// XOR defaults: full-batch plain gradient descent, evaluation every epoch.
inline RunSpec default_xor_spec() {
  RunSpec s;
  s.task.kind = TaskKind::xor_task;
  s.task.train_fraction = 1.0;
  s.model.hidden_width = 16;
  s.train.optimizer = OptimizerConfig{OptimizerKind::sgd, 0.1, 0.0, 0.9, 0.999, 1e-8};
  s.train.batch_size = 4;
  s.train.max_epochs = 4000;
  s.train.eval_every = 1;
  return s;
}

/// ModAdd-59 defaults: Adam(5e-3, wd 1e-3), batch 256, evaluation every 5 epochs.
inline RunSpec default_modadd_spec() {
  RunSpec s;
  s.task.kind = TaskKind::modadd;
  s.task.p = 59;
  s.task.train_fraction = 0.8;
  s.model.d_model = 24;
  s.model.n_heads = 4;
  s.model.n_layers = 1;
  s.model.ff_multiplier = 4;
  s.train.optimizer = OptimizerConfig{OptimizerKind::adam, 5e-3, 1e-3, 0.9, 0.999, 1e-8};
  s.train.batch_size = 256;
  s.train.max_epochs = 3000;
  s.train.eval_every = 5;
  return s;
}

constexpr std::string_view to_string(TaskKind k) noexcept { return k == TaskKind::modadd ? "modadd" : "xor"; }
constexpr std::string_view to_string(Activation a) noexcept { return a == Activation::relu ? "relu" : "tanh"; }
constexpr std::string_view to_string(OptimizerKind k) noexcept { return k == OptimizerKind::adam ? "adam" : "sgd"; }
constexpr std::string_view to_string(ProbeMode m) noexcept {
  switch (m) {
    case ProbeMode::shadow: return "shadow";
    case ProbeMode::on: return "on";
    case ProbeMode::off: return "off";
  }
  return "off";
}
constexpr std::string_view to_string(RunStatus s) noexcept {
  switch (s) {
    case RunStatus::running: return "running";
    case RunStatus::grokked: return "grokked";
    case RunStatus::ungrokked: return "ungrokked";
    case RunStatus::failed: return "failed";
    case RunStatus::unknown: return "unknown";
  }
  return "unknown";
}

inline TaskKind parse_task_kind(std::string_view s) {
  if (s == "modadd") return TaskKind::modadd;
  if (s == "xor") return TaskKind::xor_task;
  throw Error(ErrorCode::invalid_argument, "unknown task '" + std::string(s) + "'");
}
inline Activation parse_activation(std::string_view s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw Error(ErrorCode::invalid_argument, "unknown activation '" + std::string(s) + "'");
}
inline OptimizerKind parse_optimizer(std::string_view s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "sgd") return OptimizerKind::sgd;
  throw Error(ErrorCode::invalid_argument, "unknown optimizer '" + std::string(s) + "'");
}
inline ProbeMode parse_probe_mode(std::string_view s) {
  if (s == "shadow") return ProbeMode::shadow;
  if (s == "on") return ProbeMode::on;
  if (s == "off") return ProbeMode::off;
  throw Error(ErrorCode::invalid_argument, "unknown probe mode '" + std::string(s) + "'");
}
inline RunStatus parse_run_status(std::string_view s) {
  if (s == "running") return RunStatus::running;
  if (s == "grokked") return RunStatus::grokked;
  if (s == "ungrokked") return RunStatus::ungrokked;
  if (s == "failed") return RunStatus::failed;
  if (s == "unknown") return RunStatus::unknown;
  throw Error(ErrorCode::invalid_argument, "unknown run status '" + std::string(s) + "'");
}

}  // namespace tdu
