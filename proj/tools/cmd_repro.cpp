#include "analyze.hpp"
#include "sweep.hpp"

namespace cli {

void register_repro(CLI::App& app) {
  struct Args {
    std::string out;
    std::vector<std::uint32_t> widths{24, 32, 48, 64, 96, 128};
    std::vector<std::uint64_t> seeds{0, 1, 2};
    std::uint32_t p = 59;
    std::optional<std::uint32_t> max_epochs;
    unsigned workers = 1;
    bool dry_run = false;
  };
  auto a = std::make_shared<Args>();
  auto* cmd = app.add_subcommand("repro", "ModAdd pipeline: sweep, then fss, bootstrap, loo, ccdf and crossing");
  cmd->footer(
      "Layout under --out: sweep.json, runs/<cell>/ (one per width x seed), runs/summary.csv,\n"
      "analysis/{fss,bootstrap,loo,ccdf,crossing}/ holding each analysis's CSV outputs.\n"
      "Rerunning resumes the sweep and redoes the analyses. CPU-hours at the defaults.");
  cmd->add_option("--out", a->out, "Output directory (default: $TDU_OUTPUT_ROOT/repro)");
  cmd->add_option("--widths", a->widths, "d_model values")->capture_default_str();
  cmd->add_option("--seeds", a->seeds, "Seeds per width")->capture_default_str();
  cmd->add_option("--p", a->p, "Modulus")->capture_default_str();
  cmd->add_option("--max-epochs", a->max_epochs, "Epoch budget per run [3000]");
  cmd->add_option("--workers", a->workers, "Concurrent runs")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_flag("--dry-run", a->dry_run, "Write sweep.json and list the cells only");
  cmd->callback([a] {
    const fs::path root = a->out.empty() ? output_root() / "repro" : fs::path(a->out);
    SweepSpec spec;
    spec.name = "modadd" + std::to_string(a->p);
    spec.base = tdu::default_modadd_spec();
    spec.base.task.p = a->p;
    if (a->max_epochs) spec.base.train.max_epochs = *a->max_epochs;
    spec.widths = a->widths;
    spec.seeds = a->seeds;
    {
      tdu::json j;
      j["name"] = spec.name;
      j["task"] = "modadd";
      j["base"] = tdu::run_spec_to_json(spec.base);
      j["axes"] = {{"widths", spec.widths}, {"seeds", spec.seeds}};
      auto out = open_out(root / "sweep.json");
      out << j.dump(2) << '\n';
    }
    const fs::path runs = root / "runs";
    if (a->dry_run) {
      for (const auto& c : enumerate_cells(spec)) std::cout << (runs / c.name).string() << '\n';
      return;
    }
    const auto outcomes = run_sweep(spec, runs, a->workers);
    summarize_sweep(outcomes, runs);

    // Alignment needs grokked runs; the rest stay in runs/ for early-warning use.
    AnalyzeCommon c;
    for (const auto& o : outcomes) {
      if (o.manifest && o.manifest->status == tdu::RunStatus::grokked) c.runs.push_back((runs / o.cell.name).string());
    }
    std::cout << c.runs.size() << " grokked runs enter the analyses\n";
    std::vector<std::string> failed;
    auto step = [&](const std::string& name, auto fn) {
      std::cout << "\n== " << name << '\n';
      c.out = (root / "analysis" / name).string();
      try {
        fn();
      } catch (const tdu::Error& e) {
        std::cout << "error: " << e.what() << '\n';
        failed.push_back(name);
      }
    };
    step("fss", [&] { analyze_fss(c, {}); });
    step("bootstrap", [&] { analyze_bootstrap(c, {}); });
    step("loo", [&] { analyze_loo(c, {}); });
    step("ccdf", [&] { analyze_ccdf(c, {}); });
    step("crossing", [&] { analyze_crossing(c, {}); });
    if (!failed.empty()) {
      std::string list;
      for (const auto& f : failed) list += " " + f;
      throw tdu::Error(tdu::ErrorCode::insufficient_data, "steps without output:" + list);
    }
  });
}

}  // namespace cli
