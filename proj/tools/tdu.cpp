// tdu: train probed models, sweep configurations, re-probe snapshots and run
// the scaling analyses. See `tdu <subcommand> --help`.

#include "cli_common.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Avalanche probe for gradient dynamics: training, sweeps and finite-size scaling analyses"};
  app.require_subcommand(1);
  app.footer("Environment: TDU_OUTPUT_ROOT sets the default output root (default ./runs).");
  cli::register_train(app);
  cli::register_sweep(app);
  cli::register_probe(app);
  cli::register_analyze(app);
  cli::register_repro(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const tdu::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
