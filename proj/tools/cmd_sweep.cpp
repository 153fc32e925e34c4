#include <fcntl.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>

#include "cli_common.hpp"
#include "sweep.hpp"

extern char** environ;

namespace cli {
namespace {

template <class T>
std::vector<T> axis(const tdu::json& axes, const char* key) {
  if (!axes.contains(key)) return {};
  return axes[key].get<std::vector<T>>();
}

std::string num_tag(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

bool terminal(tdu::RunStatus s) {
  return s == tdu::RunStatus::grokked || s == tdu::RunStatus::ungrokked || s == tdu::RunStatus::failed;
}

std::optional<tdu::RunManifest> try_manifest(const fs::path& dir) {
  try {
    return tdu::load_manifest(dir);
  } catch (const tdu::Error&) {
    return std::nullopt;
  }
}

fs::path self_exe() { return fs::read_symlink("/proc/self/exe"); }

pid_t spawn_cell(const fs::path& exe, const fs::path& dir, const std::string& name, std::string_view task) {
  const fs::path log = dir / "log.txt";
  posix_spawn_file_actions_t fa;
  posix_spawn_file_actions_init(&fa);
  posix_spawn_file_actions_addopen(&fa, 1, log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  posix_spawn_file_actions_adddup2(&fa, 1, 2);
  posix_spawn_file_actions_addopen(&fa, 0, "/dev/null", O_RDONLY, 0);
  const std::string config = (dir / "config.json").string();
  const std::string out = dir.string();
  const std::string exe_s = exe.string();
  std::vector<std::string> args{exe_s, "train", std::string(task), "--config", config, "--out", out, "--run-id", name, "--quiet"};
  std::vector<char*> argv;
  for (auto& s : args) argv.push_back(s.data());
  argv.push_back(nullptr);
  pid_t pid = 0;
  const int rc = posix_spawn(&pid, exe_s.c_str(), &fa, nullptr, argv.data(), environ);
  posix_spawn_file_actions_destroy(&fa);
  if (rc != 0) throw tdu::Error(tdu::ErrorCode::io, "cannot start cell " + name + ": " + std::strerror(rc));
  return pid;
}

}  // namespace

SweepSpec load_sweep_spec(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw tdu::Error(tdu::ErrorCode::io, "cannot open sweep spec " + path.string());
  tdu::json j;
  try {
    in >> j;
  } catch (const tdu::json::exception& e) {
    throw tdu::Error(tdu::ErrorCode::invalid_argument, "malformed sweep spec " + path.string() + ": " + e.what());
  }
  SweepSpec s;
  s.name = j.value("name", path.stem().string());
  const auto task = tdu::parse_task_kind(j.value("task", std::string("xor")));
  s.base = task == tdu::TaskKind::modadd ? tdu::default_modadd_spec() : tdu::default_xor_spec();
  if (j.contains("base")) s.base = tdu::run_spec_from_json(j["base"], s.base);
  s.base.task.kind = task;
  if (j.contains("axes")) {
    const auto& a = j["axes"];
    try {
      s.widths = axis<std::uint32_t>(a, "widths");
      for (const auto& v : a.value("seeds", tdu::json::array())) s.seeds.push_back(tdu::detail::u64_from_json(v));
      s.alphas = axis<double>(a, "alpha");
      s.percentiles = axis<double>(a, "percentile");
      s.ps = axis<std::uint32_t>(a, "p");
      for (const auto& m : axis<std::string>(a, "probe_modes")) s.probe_modes.push_back(tdu::parse_probe_mode(m));
    } catch (const tdu::json::exception& e) {
      throw tdu::Error(tdu::ErrorCode::invalid_argument, "bad axis in " + path.string() + ": " + e.what());
    }
  }
  return s;
}

std::vector<SweepCell> enumerate_cells(const SweepSpec& spec) {
  const bool is_xor = spec.base.task.kind == tdu::TaskKind::xor_task;
  std::vector<SweepCell> cells{{"", spec.base}};
  auto expand = [&](const auto& values, auto apply) {
    if (values.empty()) return;
    std::vector<SweepCell> next;
    for (const auto& c : cells) {
      for (const auto& v : values) {
        SweepCell n = c;
        apply(n, v);
        next.push_back(std::move(n));
      }
    }
    cells = std::move(next);
  };
  auto tag = [](SweepCell& c, const std::string& t) { c.name += (c.name.empty() ? "" : "_") + t; };
  expand(spec.ps, [&](SweepCell& c, std::uint32_t p) {
    c.spec.task.p = p;
    tag(c, "p" + std::to_string(p));
  });
  expand(spec.widths, [&](SweepCell& c, std::uint32_t w) {
    (is_xor ? c.spec.model.hidden_width : c.spec.model.d_model) = w;
    tag(c, (is_xor ? "h" : "d") + std::to_string(w));
  });
  expand(spec.alphas, [&](SweepCell& c, double a) {
    c.spec.train.probe.alpha = a;
    tag(c, "a" + num_tag(a));
  });
  expand(spec.percentiles, [&](SweepCell& c, double q) {
    c.spec.train.probe.threshold_percentile = q;
    tag(c, "q" + num_tag(q));
  });
  expand(spec.probe_modes, [&](SweepCell& c, tdu::ProbeMode m) {
    c.spec.train.probe_mode = m;
    tag(c, std::string(tdu::to_string(m)));
  });
  expand(spec.seeds, [&](SweepCell& c, std::uint64_t s) {
    c.spec.train.seed = s;
    tag(c, "s" + std::to_string(s));
  });
  for (auto& c : cells) {
    if (c.name.empty()) c.name = "base";
    c.name = spec.name + "_" + c.name;
  }
  return cells;
}

std::vector<CellOutcome> run_sweep(const SweepSpec& spec, const fs::path& root, unsigned workers) {
  workers = std::max(1u, workers);
  const auto cells = enumerate_cells(spec);
  const fs::path exe = self_exe();
  std::vector<CellOutcome> outcomes;
  for (const auto& c : cells) outcomes.push_back({c, false, false, std::nullopt});

  std::map<pid_t, std::size_t> active;
  std::size_t next = 0, done = 0, launched = 0;
  auto reap_one = [&] {
    int status = 0;
    const pid_t pid = waitpid(-1, &status, 0);
    if (pid < 0) throw tdu::Error(tdu::ErrorCode::io, "waitpid failed");
    auto it = active.find(pid);
    if (it == active.end()) return;
    auto& o = outcomes[it->second];
    o.manifest = try_manifest(root / o.cell.name);
    o.produced = o.manifest && terminal(o.manifest->status);
    ++done;
    std::cout << "[" << done << "/" << launched << "] " << o.cell.name << " "
              << (o.manifest ? std::string(tdu::to_string(o.manifest->status)) : "no manifest")
              << (WIFEXITED(status) && WEXITSTATUS(status) == 0 ? "" : " (see log.txt)") << std::endl;
    active.erase(it);
  };

  for (; next < outcomes.size(); ++next) {
    auto& o = outcomes[next];
    const fs::path dir = root / o.cell.name;
    if (auto m = try_manifest(dir); m && terminal(m->status)) {
      o.skipped = true;
      o.produced = true;
      o.manifest = m;
      continue;
    }
    fs::create_directories(dir);
    {
      auto cfg = open_out(dir / "config.json");
      cfg << tdu::run_spec_to_json(o.cell.spec).dump(2) << '\n';
    }
    while (active.size() >= workers) reap_one();
    active[spawn_cell(exe, dir, o.cell.name, tdu::to_string(o.cell.spec.task.kind))] = next;
    ++launched;
  }
  while (!active.empty()) reap_one();
  return outcomes;
}

void summarize_sweep(const std::vector<CellOutcome>& cells, const fs::path& root) {
  auto csv = open_out(root / "summary.csv");
  csv << "cell,run_id,n_params,width,seed,alpha,percentile,p,probe_mode,status,grok_epoch\n";
  std::vector<double> groks;
  // grokking epochs keyed by (width, seed, p, probe mode): spread across alpha and percentile
  std::map<std::tuple<std::uint32_t, std::uint64_t, std::uint32_t, tdu::ProbeMode>, std::vector<double>> by_group;
  std::size_t missing = 0;
  for (const auto& o : cells) {
    const auto& s = o.cell.spec;
    const bool is_xor = s.task.kind == tdu::TaskKind::xor_task;
    const std::uint32_t width = is_xor ? s.model.hidden_width : s.model.d_model;
    std::string status = "missing", grok, n;
    if (o.manifest) {
      status = tdu::to_string(o.manifest->status);
      n = std::to_string(o.manifest->n_params);
      if (o.manifest->grok_epoch) {
        grok = std::to_string(*o.manifest->grok_epoch);
        groks.push_back(*o.manifest->grok_epoch);
        by_group[{width, s.train.seed, s.task.p, s.train.probe_mode}].push_back(*o.manifest->grok_epoch);
      }
    }
    if (!o.produced) ++missing;
    csv << o.cell.name << ',' << (o.manifest ? o.manifest->run_id : "") << ',' << n << ',' << width << ','
        << s.train.seed << ',' << s.train.probe.alpha << ',' << s.train.probe.threshold_percentile << ',' << s.task.p
        << ',' << tdu::to_string(s.train.probe_mode) << ',' << status << ',' << grok << '\n';
    std::printf("%-40s %-10s %8s%s\n", o.cell.name.c_str(), status.c_str(), grok.empty() ? "-" : grok.c_str(),
                o.skipped ? "  (resumed)" : "");
  }
  std::size_t grokked = groks.size();
  std::cout << grokked << "/" << cells.size() << " cells grokked";
  if (missing) std::cout << ", " << missing << " without a terminal manifest";
  std::cout << '\n';
  if (groks.size() >= 2) {
    double mean = 0.0;
    for (double g : groks) mean += g;
    mean /= static_cast<double>(groks.size());
    double var = 0.0;
    for (double g : groks) var += (g - mean) * (g - mean);
    const double cv = std::sqrt(var / static_cast<double>(groks.size())) / mean;
    double worst = 0.0;
    for (const auto& [key, v] : by_group) {
      if (v.size() < 2) continue;
      const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
      double m = 0.0;
      for (double g : v) m += g;
      m /= static_cast<double>(v.size());
      worst = std::max(worst, (*hi - *lo) / m);
    }
    std::cout << "grokking epoch: mean " << fmt(mean, 1) << ", relative spread (std/mean) " << fmt(100.0 * cv, 2)
              << "%, max spread within a (width, seed, p, probe mode) group " << fmt(100.0 * worst, 2) << "%\n";
  }
  std::cout << (root / "summary.csv").string() << std::endl;
}

void register_sweep(CLI::App& app) {
  struct Args {
    std::string spec, out;
    unsigned workers = 1;
    bool dry_run = false;
  };
  auto a = std::make_shared<Args>();
  auto* cmd = app.add_subcommand("sweep", "Run the Cartesian product of a sweep spec, one child process per cell");
  cmd->footer(
      "Spec (JSON): {\"name\": str, \"task\": \"xor\"|\"modadd\", \"base\": <run spec overlay>,\n"
      "  \"axes\": {\"widths\": [..], \"seeds\": [..], \"alpha\": [..], \"percentile\": [..], \"p\": [..],\n"
      "           \"probe_modes\": [..]}}\n"
      "Each cell directory holds config.json, log.txt and the run outputs. Cells whose manifest\n"
      "already has a terminal status are skipped. Writes summary.csv\n"
      "(cell,run_id,n_params,width,seed,alpha,percentile,p,probe_mode,status,grok_epoch).");
  cmd->add_option("spec", a->spec, "Sweep spec JSON")->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", a->out, "Sweep directory (default: $TDU_OUTPUT_ROOT/<name>)");
  cmd->add_option("--workers", a->workers, "Concurrent cells")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_flag("--dry-run", a->dry_run, "List the cells without running them");
  cmd->callback([a] {
    const auto spec = load_sweep_spec(a->spec);
    const fs::path root = a->out.empty() ? output_root() / spec.name : fs::path(a->out);
    if (a->dry_run) {
      for (const auto& c : enumerate_cells(spec)) std::cout << (root / c.name).string() << '\n';
      return;
    }
    const auto outcomes = run_sweep(spec, root, a->workers);
    summarize_sweep(outcomes, root);
    for (const auto& o : outcomes) {
      if (!o.produced) throw tdu::Error(tdu::ErrorCode::io, "cell " + o.cell.name + " did not finish; see its log.txt");
    }
  });
}

}  // namespace cli
