#include "cli_common.hpp"

#include "tdu/train/trainer.hpp"

namespace cli {
namespace {

struct TrainArgs {
  std::string task;
  std::string config;
  std::string out;
  std::string run_id;
  bool quiet = false;
  bool no_probe = false;

  std::optional<std::uint32_t> hidden, p, d_model, n_heads, n_layers, batch_size, max_epochs, eval_every, max_iter,
      snapshot_every;
  std::optional<std::uint64_t> seed, split_seed, attach_m;
  std::optional<double> lr, weight_decay, train_fraction, alpha, percentile, stop_after_t, init_scale, grok_threshold;
  std::optional<std::string> activation, optimizer, probe;
  bool decoupled = false;
};

tdu::RunSpec read_config_file(const std::string& path, tdu::RunSpec base) {
  std::ifstream in(path);
  if (!in) throw tdu::Error(tdu::ErrorCode::io, "cannot open config " + path);
  tdu::json j;
  try {
    in >> j;
  } catch (const tdu::json::exception& e) {
    throw tdu::Error(tdu::ErrorCode::invalid_argument, "malformed config " + path + ": " + e.what());
  }
  // A full run directory manifest also works as a config.
  if (j.contains("spec")) j = j["spec"];
  return tdu::run_spec_from_json(j, base);
}

// defaults < config file < flags
tdu::RunSpec effective_spec(const TrainArgs& a) {
  tdu::RunSpec s = a.task == "modadd" ? tdu::default_modadd_spec() : tdu::default_xor_spec();
  if (!a.config.empty()) {
    s = read_config_file(a.config, s);
    if (s.task.kind != tdu::parse_task_kind(a.task)) {
      throw tdu::Error(tdu::ErrorCode::invalid_argument, "config " + a.config + " is for task '" +
                                                             std::string(tdu::to_string(s.task.kind)) + "', not '" +
                                                             a.task + "'");
    }
  }
  auto set = [](auto& dst, const auto& src) {
    if (src) dst = *src;
  };
  set(s.model.hidden_width, a.hidden);
  set(s.task.p, a.p);
  set(s.model.d_model, a.d_model);
  set(s.model.n_heads, a.n_heads);
  set(s.model.n_layers, a.n_layers);
  set(s.model.init_scale, a.init_scale);
  set(s.task.train_fraction, a.train_fraction);
  set(s.task.split_seed, a.split_seed);
  if (a.activation) s.model.activation = tdu::parse_activation(*a.activation);
  if (a.optimizer) s.train.optimizer.kind = tdu::parse_optimizer(*a.optimizer);
  set(s.train.optimizer.lr, a.lr);
  set(s.train.optimizer.weight_decay, a.weight_decay);
  if (a.decoupled) s.train.optimizer.decoupled_decay = true;
  set(s.train.batch_size, a.batch_size);
  set(s.train.max_epochs, a.max_epochs);
  set(s.train.eval_every, a.eval_every);
  set(s.train.seed, a.seed);
  set(s.train.attach_m, a.attach_m);
  set(s.train.probe.alpha, a.alpha);
  set(s.train.probe.threshold_percentile, a.percentile);
  set(s.train.probe.max_iterations, a.max_iter);
  set(s.train.snapshot_every, a.snapshot_every);
  set(s.train.grok_threshold, a.grok_threshold);
  if (a.stop_after_t) s.train.stop_after_t = *a.stop_after_t;
  if (a.probe) s.train.probe_mode = tdu::parse_probe_mode(*a.probe);
  if (a.no_probe) s.train.probe_mode = tdu::ProbeMode::off;
  return s;
}

std::string default_run_name(const tdu::RunSpec& s) {
  std::string name;
  if (s.task.kind == tdu::TaskKind::xor_task) {
    name = "xor_h" + std::to_string(s.model.hidden_width);
  } else {
    name = "modadd_p" + std::to_string(s.task.p) + "_d" + std::to_string(s.model.d_model);
  }
  name += "_s" + std::to_string(s.train.seed);
  if (s.train.probe_mode != tdu::ProbeMode::shadow) name += "_" + std::string(tdu::to_string(s.train.probe_mode));
  return name;
}

void run_train(const TrainArgs& a) {
  const tdu::RunSpec spec = effective_spec(a);
  const std::string name = a.run_id.empty() ? default_run_name(spec) : a.run_id;
  const fs::path dir = a.out.empty() ? output_root() / name : fs::path(a.out);
  std::cout << "run " << name << " N=" << tdu::count_params(spec) << " -> " << (dir / tdu::kManifestFile).string()
            << std::endl;

  tdu::TrainObserver obs;
  if (!a.quiet) {
    obs.on_eval = [](const tdu::AccuracyPoint& pt) {
      std::cout << "epoch " << pt.epoch << " loss " << fmt(pt.loss, 6) << " train " << fmt(pt.train_acc) << " test "
                << fmt(pt.test_acc) << '\n';
    };
  }
  const auto res = tdu::train_run(spec, name, dir, obs);
  const auto& m = res.manifest;
  std::cout << "status " << tdu::to_string(m.status);
  if (m.grok_epoch) std::cout << " grok_epoch " << *m.grok_epoch;
  std::cout << " records " << res.records.size() << "\n"
            << (dir / tdu::kManifestFile).string() << std::endl;
  if (m.status == tdu::RunStatus::failed) {
    throw tdu::Error(tdu::ErrorCode::divergence, m.failure + "; partial records kept in " + dir.string());
  }
}

}  // namespace

void register_train(CLI::App& app) {
  auto a = std::make_shared<TrainArgs>();
  auto* cmd = app.add_subcommand("train", "Train one run with the avalanche probe attached");
  cmd->footer(
      "Precedence: flags > --config file > task defaults.\n"
      "Outputs in the run directory: manifest.json (effective config, N, graph seed and digest, status,\n"
      "grokking epoch), trace.csv (epoch,train_acc,test_acc,loss), avalanches.csv\n"
      "(run_id,epoch,batch,size,iterations,truncated,rotation_cos), snapshots/ when --snapshot-every > 0.");
  cmd->add_option("task", a->task, "xor | modadd")->required()->check(CLI::IsMember({"xor", "modadd"}));
  cmd->add_option("--config", a->config, "JSON run spec (or a run manifest) overlaid on the task defaults");
  cmd->add_option("--out", a->out, "Run directory (default: $TDU_OUTPUT_ROOT/<run id>)");
  cmd->add_option("--run-id", a->run_id, "Run id (default derived from task, size and seed)");
  cmd->add_flag("--quiet", a->quiet, "Suppress per-evaluation status lines");

  cmd->add_option("--hidden", a->hidden, "XOR hidden width [16]");
  cmd->add_option("--activation", a->activation, "XOR activation: tanh | relu [tanh]");
  cmd->add_option("--p", a->p, "ModAdd modulus [59]");
  cmd->add_option("--d-model", a->d_model, "ModAdd embedding width [24]");
  cmd->add_option("--n-heads", a->n_heads, "ModAdd attention heads [4]");
  cmd->add_option("--n-layers", a->n_layers, "ModAdd layers [1]");
  cmd->add_option("--init-scale", a->init_scale, "Initialization scale [1]");
  cmd->add_option("--train-fraction", a->train_fraction, "ModAdd training fraction [0.8]");
  cmd->add_option("--split-seed", a->split_seed, "ModAdd split seed [0]");

  cmd->add_option("--optimizer", a->optimizer, "sgd | adam [xor: sgd, modadd: adam]");
  cmd->add_option("--lr", a->lr, "Learning rate [xor: 0.1, modadd: 5e-3]");
  cmd->add_option("--weight-decay", a->weight_decay, "Weight decay [xor: 0, modadd: 1e-3]");
  cmd->add_flag("--decoupled-decay", a->decoupled, "Apply weight decay as a separate shrink step (AdamW form)");
  cmd->add_option("--batch-size", a->batch_size, "Batch size [xor: 4, modadd: 256]");
  cmd->add_option("--max-epochs", a->max_epochs, "Epoch budget [xor: 4000, modadd: 3000]");
  cmd->add_option("--eval-every", a->eval_every, "Evaluate every k epochs [xor: 1, modadd: 5]");
  cmd->add_option("--seed", a->seed, "Run seed (init, shuffling, graph) [0]");
  cmd->add_option("--grok-threshold", a->grok_threshold, "Test accuracy that counts as grokked [0.99]");
  cmd->add_option("--stop-after-t", a->stop_after_t, "Stop once epoch >= g(1+t) after grokking");

  auto* probe = cmd->add_option("--probe", a->probe, "Probe mode: shadow | on | off [shadow]")
                    ->check(CLI::IsMember({"shadow", "on", "off"}));
  auto* no_probe = cmd->add_flag("--no-probe", a->no_probe, "Same as --probe off");
  probe->excludes(no_probe);
  cmd->add_option("--alpha", a->alpha, "Redistribution fraction [0.3]");
  cmd->add_option("--percentile", a->percentile, "Threshold percentile of |g| [90]");
  cmd->add_option("--max-iter", a->max_iter, "Cascade iteration cap [20]");
  cmd->add_option("--attach-m", a->attach_m, "Edges per new node in the parameter graph [2]");
  cmd->add_option("--snapshot-every", a->snapshot_every, "Store gradient snapshots every k-th evaluation [0: off]");
  cmd->callback([a] { run_train(*a); });
}

}  // namespace cli
