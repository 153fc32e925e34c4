#include <algorithm>
#include <cmath>

#include "analyze.hpp"
#include "tdu/synth.hpp"

namespace cli {
namespace {

void add_bin_flags(CLI::App* cmd, BinArgs& b) {
  cmd->add_option("--bins", b.bins, "Regular time bins on [t-min, t-max]")->capture_default_str();
  cmd->add_option("--t-min", b.t_min, "Lower edge of the aligned-time grid")->capture_default_str();
  cmd->add_option("--t-max", b.t_max, "Upper edge; later samples go to one overflow bin")->capture_default_str();
  cmd->add_flag("--no-overflow", b.no_overflow, "Drop samples past t-max instead of binning them");
}

void add_boot_flags(CLI::App* cmd, BootArgs& b) {
  cmd->add_option("--resamples", b.resamples, "Bootstrap resamples")->capture_default_str();
  cmd->add_option("--seed", b.seed, "Bootstrap seed")->capture_default_str();
  cmd->add_option("--t-min", b.t_min, "Ignore samples with t below this");
  cmd->add_option("--t-max", b.t_max, "Ignore samples with t above this");
}

std::string fit_cols(const std::optional<tdu::ScalingFit>& f) {
  if (!f) return ",,";
  return opt_cell(f->exponent) + "," + opt_cell(f->std_error) + "," + opt_cell(f->r_squared);
}

std::string pm(double v, double e) { return fmt(v, 3) + " +- " + fmt(e, 3); }

void write_dt_series(const fs::path& path, std::span<const tdu::BinnedFit> d, std::span<const tdu::BinnedFit> gamma) {
  auto out = open_out(path);
  out << "lo,hi,center,overflow,n_scales,D,D_std_error,D_r2,gamma,gamma_std_error,gamma_r2\n";
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto& b = d[i];
    out << b.lo << ',' << (b.overflow ? std::string("inf") : opt_cell(b.hi)) << ',' << b.center << ','
        << (b.overflow ? 1 : 0) << ',' << b.n_scales << ',' << fit_cols(b.fit) << ',' << fit_cols(gamma[i].fit)
        << '\n';
  }
}

void print_series_summary(std::span<const tdu::BinnedFit> d) {
  std::size_t fitted = 0;
  double lo = INFINITY, hi = -INFINITY, r2 = 1.0;
  for (const auto& b : d) {
    if (!b.fit) continue;
    ++fitted;
    lo = std::min(lo, b.fit->exponent);
    hi = std::max(hi, b.fit->exponent);
    r2 = std::min(r2, b.fit->r_squared);
  }
  std::cout << "fitted bins " << fitted << "/" << d.size() << " (gaps need >= 3 scales)";
  if (fitted) std::cout << ", D in [" << fmt(lo, 3) << ", " << fmt(hi, 3) << "], min R^2 " << fmt(r2, 3);
  std::cout << '\n';
}

tdu::PhaseWindow phase_window(const BootArgs& a) { return {a.t_min, a.t_max}; }

}  // namespace

void analyze_fss(const AnalyzeCommon& c, const FssArgs& a) {
  const auto set = load_run_set(c.runs, c.records);
  const auto obs = tdu::parse_observable(c.observable);
  const fs::path dir = c.out_dir("fss");
  std::cout << describe(set) << ", truncation rate " << fmt(100.0 * set.truncation_rate, 2) << "%\n";
  if (a.epoch_width > 0) {
    require_scales(set, 3, "fss");
    const auto series = tdu::fss_over_epochs(set.scales, a.epoch_width, obs);
    auto out = open_out(dir / "depoch_series.csv");
    out << "epoch_lo,epoch_hi,D,D_std_error,D_r2\n";
    std::size_t fitted = 0;
    for (const auto& e : series) {
      out << e.epoch_lo << ',' << e.epoch_hi << ',' << fit_cols(e.fit) << '\n';
      fitted += e.fit.has_value();
    }
    std::cout << "absolute-epoch windows fitted " << fitted << "/" << series.size() << "\n"
              << (dir / "depoch_series.csv").string() << '\n';
    return;
  }
  require_grokked(set);
  require_scales(set, 3, "fss");
  const auto bins = a.bins.time_bins();
  const auto d = tdu::fss_over_time(set.scales, bins, obs);
  const auto gamma = tdu::fss_over_time(set.scales, bins, tdu::Observable::s_avg);
  write_dt_series(dir / "dt_series.csv", d, gamma);
  print_series_summary(d);
  std::cout << (dir / "dt_series.csv").string() << '\n';
}

void analyze_bootstrap(const AnalyzeCommon& c, const BootArgs& a) {
  const auto set = load_run_set(c.runs, c.records);
  require_grokked(set);
  require_scales(set, 3, "bootstrap");
  tdu::BootstrapOptions opt;
  opt.n_resamples = a.resamples;
  opt.seed = a.seed;
  opt.hist_bins = a.hist_bins;
  opt.observable = tdu::parse_observable(c.observable);
  opt.window = phase_window(a);
  const auto split = tdu::bootstrap_phase_split(set.scales, opt);
  const fs::path dir = c.out_dir("bootstrap");
  auto sum = open_out(dir / "bootstrap_summary.csv");
  auto hist = open_out(dir / "bootstrap_hist.csv");
  sum << "phase,mean_D,std_D,plug_in_D,n_scales,n_resamples,failed\n";
  hist << "phase,bin_lo,bin_hi,count\n";
  std::cout << describe(set) << '\n';
  for (const auto& s : {split.pre, split.post}) {
    if (!s) continue;
    sum << tdu::to_string(s->phase) << ',' << s->mean_D << ',' << s->std_D << ',' << s->plug_in_D << ','
        << s->n_scales << ',' << s->n_resamples << ',' << s->failed << '\n';
    const auto& h = s->distribution;
    const double w = (h.hi - h.lo) / static_cast<double>(h.counts.size());
    for (std::size_t i = 0; i < h.counts.size(); ++i) {
      hist << tdu::to_string(s->phase) << ',' << h.lo + w * static_cast<double>(i) << ','
           << h.lo + w * static_cast<double>(i + 1) << ',' << h.counts[i] << '\n';
    }
    std::cout << "D_" << tdu::to_string(s->phase) << " = " << pm(s->mean_D, s->std_D) << "  (plug-in "
              << fmt(s->plug_in_D, 3) << ", " << s->n_scales << " scales, " << s->n_resamples << " resamples)\n";
  }
  if (!split.pre || !split.post) {
    throw tdu::Error(tdu::ErrorCode::insufficient_data,
                     std::string("no ") + (!split.pre ? "pre" : "post") +
                         "-grokking samples at >= 3 scales; extend the runs on that side of t = 0");
  }
  const bool separated = split.pre->mean_D - split.pre->std_D > split.post->mean_D + split.post->std_D ||
                         split.post->mean_D - split.post->std_D > split.pre->mean_D + split.pre->std_D;
  std::cout << "+-1 sigma intervals " << (separated ? "do not overlap" : "overlap") << "\n"
            << (dir / "bootstrap_summary.csv").string() << '\n';
}

void analyze_loo(const AnalyzeCommon& c, const BootArgs& a) {
  const auto set = load_run_set(c.runs, c.records);
  require_grokked(set);
  require_scales(set, 4, "leave-one-scale-out");
  const auto res = tdu::leave_one_scale_out(set.scales, tdu::parse_observable(c.observable), phase_window(a));
  const fs::path dir = c.out_dir("loo");
  auto out = open_out(dir / "loo_table.csv");
  out << "omitted_n,d_pre,d_post,shift_pre,shift_post\n";
  out << "none," << opt_cell(res.full_pre) << ',' << opt_cell(res.full_post) << ",0,0\n";
  double worst_pre = 0.0, worst_post = 0.0;
  for (const auto& r : res.rows) {
    out << r.omitted_n << ',' << opt_cell(r.d_pre) << ',' << opt_cell(r.d_post) << ',' << opt_cell(r.shift_pre) << ','
        << opt_cell(r.shift_post) << '\n';
    if (r.shift_pre) worst_pre = std::max(worst_pre, std::abs(*r.shift_pre));
    if (r.shift_post) worst_post = std::max(worst_post, std::abs(*r.shift_post));
  }
  std::cout << describe(set) << "\nfull-set D_pre " << (res.full_pre ? fmt(*res.full_pre, 3) : "-") << ", D_post "
            << (res.full_post ? fmt(*res.full_post, 3) : "-") << "\nmax |shift| pre " << fmt(worst_pre, 3)
            << ", post " << fmt(worst_post, 3) << '\n'
            << (dir / "loo_table.csv").string() << '\n';
}

void analyze_ccdf(const AnalyzeCommon& c, const CcdfArgs& a) {
  const auto set = load_run_set(c.runs, c.records);
  require_grokked(set);
  const auto samples = tdu::window_epoch_sums(set.scales, a.window);
  const auto res = tdu::ccdf_and_cutoff(samples, a.percentile, a.min_samples);
  const fs::path dir = c.out_dir("ccdf");
  auto curves = [](std::ofstream out, std::span<const tdu::CcdfCurve> cs) {
    out << "n_params,x,p\n";
    for (const auto& cv : cs) {
      for (std::size_t i = 0; i < cv.x.size(); ++i) out << cv.n_params << ',' << cv.x[i] << ',' << cv.p[i] << '\n';
    }
  };
  curves(open_out(dir / "ccdf_points.csv"), res.ccdf);
  {
    auto out = open_out(dir / "cutoffs.csv");
    out << "n_params,s_c\n";
    for (const auto& [n, sc] : res.cutoffs) out << n << ',' << sc << '\n';
  }
  std::cout << describe(set) << ", window +-" << a.window << " epochs\n";
  if (!res.fit) throw tdu::Error(tdu::ErrorCode::insufficient_data, res.refusal);
  curves(open_out(dir / "collapse_points.csv"), res.collapse);
  std::cout << "D_cut = " << pm(res.fit->exponent, res.fit->std_error) << ", R^2 " << fmt(res.fit->r_squared, 3)
            << '\n'
            << (dir / "ccdf_points.csv").string() << '\n';
}

void analyze_crossing(const AnalyzeCommon& c, const CrossingArgs& a) {
  const auto set = load_run_set(c.runs, c.records);
  require_grokked(set);
  require_scales(set, 3, "crossing");
  const auto obs = tdu::parse_observable(c.observable);
  const auto d = tdu::fss_over_time(set.scales, a.bins.time_bins(), obs);
  const auto gamma = tdu::fss_over_time(set.scales, a.bins.time_bins(), tdu::Observable::s_avg);
  const auto rep = tdu::crossing_detector(d, a.window);
  const fs::path dir = c.out_dir("crossing");
  write_dt_series(dir / "dt_series.csv", d, gamma);
  {
    auto out = open_out(dir / "crossing_report.csv");
    out << "direction,t_cross,d0,d0_std_error,bins_in_window,window\n"
        << tdu::to_string(rep.direction) << ',' << opt_cell(rep.t_cross) << ',' << opt_cell(rep.d0) << ','
        << opt_cell(rep.d0_std_error) << ',' << rep.bins_in_window << ',' << a.window << '\n';
  }
  std::cout << describe(set) << '\n';
  print_series_summary(d);
  std::cout << "direction=" << tdu::to_string(rep.direction);
  if (rep.t_cross) std::cout << " t_cross=" << fmt(*rep.t_cross, 3);
  if (rep.d0) std::cout << " D0=" << pm(*rep.d0, *rep.d0_std_error);
  std::cout << "\n" << (dir / "crossing_report.csv").string() << '\n';
  if (rep.bins_in_window < 2) {
    throw tdu::Error(tdu::ErrorCode::insufficient_data,
                     "fewer than 2 fitted bins within |t| <= " + fmt(a.window, 2) + "; add scales or runs near t = 0");
  }
}

void register_analyze(CLI::App& app) {
  auto* an = app.add_subcommand("analyze", "Scaling analyses over run directories");
  an->require_subcommand(1);
  an->footer("All outputs are CSV files with a header row, plus a short summary on stdout.");

  {
    auto c = std::make_shared<AnalyzeCommon>();
    auto a = std::make_shared<FssArgs>();
    auto* cmd = an->add_subcommand("fss", "Grokking-aligned D(t) and gamma(t)");
    cmd->footer(
        "dt_series.csv: lo,hi,center,overflow,n_scales,D,D_std_error,D_r2,gamma,gamma_std_error,gamma_r2\n"
        "(empty fit columns mark gaps). With --epoch-width: depoch_series.csv in absolute epochs.");
    add_common(cmd, *c);
    add_bin_flags(cmd, a->bins);
    cmd->add_option("--epoch-width", a->epoch_width, "Fit in absolute epoch windows of this width instead");
    cmd->callback([c, a] { analyze_fss(*c, *a); });
  }
  {
    auto c = std::make_shared<AnalyzeCommon>();
    auto a = std::make_shared<BootArgs>();
    auto* cmd = an->add_subcommand("bootstrap", "Phase-split bootstrap of D (pre: t < 0, post: t >= 0)");
    cmd->footer(
        "bootstrap_summary.csv: phase,mean_D,std_D,plug_in_D,n_scales,n_resamples,failed\n"
        "bootstrap_hist.csv: phase,bin_lo,bin_hi,count");
    add_common(cmd, *c);
    add_boot_flags(cmd, *a);
    cmd->add_option("--hist-bins", a->hist_bins, "Histogram bins")->capture_default_str();
    cmd->callback([c, a] { analyze_bootstrap(*c, *a); });
  }
  {
    auto c = std::make_shared<AnalyzeCommon>();
    auto a = std::make_shared<BootArgs>();
    auto* cmd = an->add_subcommand("loo", "Leave-one-scale-out refits of D_pre and D_post");
    cmd->footer("loo_table.csv: omitted_n,d_pre,d_post,shift_pre,shift_post (first row: full set)");
    add_common(cmd, *c);
    cmd->add_option("--t-min", a->t_min, "Ignore samples with t below this");
    cmd->add_option("--t-max", a->t_max, "Ignore samples with t above this");
    cmd->callback([c, a] { analyze_loo(*c, *a); });
  }
  {
    auto c = std::make_shared<AnalyzeCommon>();
    auto a = std::make_shared<CcdfArgs>();
    auto* cmd = an->add_subcommand("ccdf", "CCDF of epoch-summed sizes near grokking, cutoff scaling, collapse");
    cmd->footer(
        "ccdf_points.csv and collapse_points.csv: n_params,x,p with p = P(S >= x) (collapse: x = S / N^D_cut)\n"
        "cutoffs.csv: n_params,s_c");
    add_common(cmd, *c);
    cmd->add_option("--window", a->window, "Epochs on each side of the grokking epoch")->capture_default_str();
    cmd->add_option("--percentile", a->percentile, "Cutoff percentile")->capture_default_str();
    cmd->add_option("--min-samples", a->min_samples, "Minimum in-window samples per scale")->capture_default_str();
    cmd->callback([c, a] { analyze_ccdf(*c, *a); });
  }
  {
    auto c = std::make_shared<AnalyzeCommon>();
    auto a = std::make_shared<CrossingArgs>();
    auto* cmd = an->add_subcommand("crossing", "Locate the first D = 1 crossing near t = 0");
    cmd->footer(
        "crossing_report.csv: direction,t_cross,d0,d0_std_error,bins_in_window,window\n"
        "dt_series.csv as for `analyze fss`.");
    add_common(cmd, *c);
    add_bin_flags(cmd, a->bins);
    cmd->add_option("--window", a->window, "Search |t| <= window")->capture_default_str();
    cmd->callback([c, a] { analyze_crossing(*c, *a); });
  }
  {
    struct Args {
      std::vector<std::string> shadow, on;
      std::string out, records, observable = "s_max";
      BinArgs bins;
      double window = 0.5;
    };
    auto a = std::make_shared<Args>();
    auto* cmd = an->add_subcommand("shadow-delta", "D(t) difference between shadow-probe and probe-on runs");
    cmd->footer("delta_d.csv: t,d_shadow,d_on,delta (delta = d_shadow - d_on)");
    cmd->add_option("--shadow", a->shadow, "Shadow-mode run directories")->required();
    cmd->add_option("--on", a->on, "Probe-on run directories")->required();
    cmd->add_option("--out", a->out, "Output directory");
    cmd->add_option("--records", a->records, "Record file name inside each run");
    cmd->add_option("--observable", a->observable, "s_max | s_avg | s_epoch")->capture_default_str();
    add_bin_flags(cmd, a->bins);
    cmd->add_option("--window", a->window, "Compare bins with |t| <= window")->capture_default_str();
    cmd->callback([a] {
      const auto obs = tdu::parse_observable(a->observable);
      const auto sh = load_run_set(a->shadow, a->records);
      const auto on = load_run_set(a->on, a->records);
      require_grokked(sh);
      require_grokked(on);
      require_scales(sh, 3, "shadow-delta (shadow runs)");
      require_scales(on, 3, "shadow-delta (probe-on runs)");
      const auto ds = tdu::fss_over_time(sh.scales, a->bins.time_bins(), obs);
      const auto dn = tdu::fss_over_time(on.scales, a->bins.time_bins(), obs);
      const auto res = tdu::shadow_delta(ds, dn, a->window);
      const fs::path dir = a->out.empty() ? output_root() / "analysis" / "shadow-delta" : fs::path(a->out);
      auto out = open_out(dir / "delta_d.csv");
      out << "t,d_shadow,d_on,delta\n";
      for (const auto& p : res.points) out << p.t << ',' << p.d_shadow << ',' << p.d_on << ',' << p.delta << '\n';
      std::cout << "shadow: " << describe(sh) << "\non: " << describe(on) << "\n"
                << res.points.size() << " shared bins within |t| <= " << fmt(a->window, 2) << ", max |dD| = "
                << fmt(res.max_abs, 4) << '\n'
                << (dir / "delta_d.csv").string() << '\n';
    });
  }
  {
    struct Args {
      AnalyzeCommon c;
      std::uint32_t epoch = 100;
      std::uint32_t half_width = 0;
      std::optional<double> threshold;
      double gate = 0.95;
      std::size_t min_population = 5;
    };
    auto a = std::make_shared<Args>();
    auto* cmd = an->add_subcommand("early-warning", "Classify will-grok vs never-grok from D at a fixed epoch");
    cmd->footer(
        "A cohort is the set of runs sharing a seed and realized outcome across >= 3 scales; its D is\n"
        "fitted in absolute epoch at --epoch. early_warning_report.csv:\n"
        "id,d,r2,realized_grok,predicted_grok,gated_out. Without --threshold the best separating one is used.");
    add_common(cmd, a->c);
    cmd->add_option("--epoch", a->epoch, "Probe epoch")->capture_default_str();
    cmd->add_option("--half-width", a->half_width, "Use epochs within +-this of --epoch")->capture_default_str();
    cmd->add_option("--threshold", a->threshold, "Predict grok iff D <= threshold");
    cmd->add_option("--gate", a->gate, "Minimum R^2 for a cohort to be classified")->capture_default_str();
    cmd->add_option("--min-population", a->min_population, "Runs per population for a verdict")->capture_default_str();
    cmd->callback([a] {
      const auto set = load_run_set(a->c.runs, a->c.records);
      const auto cohorts =
          tdu::cohort_exponents(set.scales, a->epoch, a->half_width, tdu::parse_observable(a->c.observable));
      if (cohorts.empty()) {
        throw tdu::Error(tdu::ErrorCode::insufficient_data,
                         "no cohort reaches 3 scales with samples at epoch " + std::to_string(a->epoch) +
                             "; runs sharing a seed must cover >= 3 widths and reach that epoch");
      }
      const double th = a->threshold ? *a->threshold : tdu::best_separating_threshold(cohorts, a->gate);
      const auto rep = tdu::early_warning_classify(cohorts, th, a->gate);
      const fs::path dir = a->c.out_dir("early-warning");
      auto out = open_out(dir / "early_warning_report.csv");
      out << "id,d,r2,realized_grok,predicted_grok,gated_out\n";
      for (const auto& r : rep.rows) {
        out << r.id << ',' << r.d << ',' << r.r_squared << ',' << r.realized_grok << ',' << r.predicted_grok << ','
            << r.gated_out << '\n';
      }
      std::size_t grok_runs = 0, never_runs = 0;
      for (const auto& run : set.runs) {
        grok_runs += run.status == tdu::RunStatus::grokked;
        never_runs += run.status == tdu::RunStatus::ungrokked;
      }
      std::cout << describe(set) << "\nthreshold D = " << fmt(th, 3) << ", accuracy " << fmt(rep.accuracy, 3) << " ("
                << rep.true_pos << " TP, " << rep.true_neg << " TN, " << rep.false_pos << " FP, " << rep.false_neg
                << " FN)\n";
      if (grok_runs < a->min_population || never_runs < a->min_population) {
        std::cout << "populations too small for a verdict (grokked runs " << grok_runs << ", never-grokked runs "
                  << never_runs << ", need " << a->min_population << " each)\n";
      }
      std::cout << (dir / "early_warning_report.csv").string() << '\n';
    });
  }
  {
    struct Args {
      std::vector<std::uint64_t> n_values{2000, 4000, 8000, 16000, 32000, 64000};
      std::uint32_t variants = 3, epochs = 40, batches = 4, resamples = 1000;
      std::uint64_t attach_m = 2, seed = 0;
      double sigma = 1.0;
      std::optional<double> alpha, percentile;
      std::string out;
      bool write_runs = false;
    };
    auto a = std::make_shared<Args>();
    auto* cmd = an->add_subcommand("synth-baseline", "D for i.i.d. Gaussian gradients across scales and graph variants");
    cmd->footer(
        "synth_baseline.csv: variant,attach_m,build_seed,D,D_std_error,D_r2,boot_mean_D,boot_std_D\n"
        "Graph variant k uses build seed k+1. --write-runs also stores each cell as a run directory.");
    cmd->add_option("--n-values", a->n_values, "Scales")->capture_default_str();
    cmd->add_option("--variants", a->variants, "Graph variants")->capture_default_str();
    cmd->add_option("--epochs", a->epochs, "Epochs per cell")->capture_default_str();
    cmd->add_option("--batches", a->batches, "Batches per epoch")->capture_default_str();
    cmd->add_option("--resamples", a->resamples, "Bootstrap resamples per variant (0: none)")->capture_default_str();
    cmd->add_option("--attach-m", a->attach_m, "Graph edges per new node")->capture_default_str();
    cmd->add_option("--sigma", a->sigma, "Gaussian scale")->capture_default_str();
    cmd->add_option("--seed", a->seed, "Gradient stream seed")->capture_default_str();
    cmd->add_option("--alpha", a->alpha, "Redistribution fraction [0.3]");
    cmd->add_option("--percentile", a->percentile, "Threshold percentile [90]");
    cmd->add_option("--out", a->out, "Output directory");
    cmd->add_flag("--write-runs", a->write_runs, "Also write run directories");
    cmd->callback([a] {
      tdu::SynthSpec s;
      s.n_values = a->n_values;
      s.epochs = a->epochs;
      s.batches_per_epoch = a->batches;
      s.sigma = a->sigma;
      s.seed = a->seed;
      s.graph_variants.clear();
      for (std::uint32_t k = 0; k < a->variants; ++k) s.graph_variants.push_back({a->attach_m, k + 1});
      if (a->alpha) s.probe.alpha = *a->alpha;
      if (a->percentile) s.probe.threshold_percentile = *a->percentile;
      const auto cells = tdu::generate_synthetic_run(s);
      const auto base = tdu::summarize_synthetic(cells, tdu::Observable::s_max, a->resamples, a->seed);
      const fs::path dir = a->out.empty() ? output_root() / "analysis" / "synth-baseline" : fs::path(a->out);
      if (a->write_runs) {
        for (const auto& c : cells) {
          auto m = c.manifest;
          m.avalanche_record_path = tdu::kRecordFile;
          tdu::save_records(dir / "runs" / m.run_id / tdu::kRecordFile, c.records);
          tdu::save_manifest(dir / "runs" / m.run_id, m);
        }
      }
      auto out = open_out(dir / "synth_baseline.csv");
      out << "variant,attach_m,build_seed,D,D_std_error,D_r2,boot_mean_D,boot_std_D\n";
      std::cout << "variant  build_seed  D        R^2\n";
      for (const auto& v : base.variants) {
        out << v.variant << ',' << v.graph.attach_m << ',' << v.graph.build_seed << ',' << v.fit.exponent << ','
            << v.fit.std_error << ',' << v.fit.r_squared << ','
            << (v.bootstrap ? opt_cell(v.bootstrap->mean_D) : "") << ','
            << (v.bootstrap ? opt_cell(v.bootstrap->std_D) : "") << '\n';
        std::printf("%-8zu %-11llu %-8s %s\n", v.variant, static_cast<unsigned long long>(v.graph.build_seed),
                    fmt(v.fit.exponent, 4).c_str(), fmt(v.fit.r_squared, 4).c_str());
      }
      std::cout << "D_synth = " << pm(base.mean_D, base.std_D) << " across " << base.variants.size()
                << " graph variants, CV " << fmt(100.0 * base.cv, 3) << "%\n"
                << (dir / "synth_baseline.csv").string() << '\n';
    });
  }
}

}  // namespace cli
