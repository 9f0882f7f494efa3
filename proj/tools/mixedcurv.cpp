#include "mixedcurv/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"mixedcurv: mixed scalar curvature inequalities for isometric immersions"};
  app.require_subcommand(0, 1);
  bool list = false;
  app.add_flag("--list-builtins", list, "list the builtin scenarios and exit");

  mixedcurv::RunConfig cfg;
  auto* verify = app.add_subcommand("verify", "run the checks of a scenario");
  verify->add_option("scenario", cfg.scenario, "scenario file, or builtin:<name>");
  verify->add_flag("--list-builtins", list, "list the builtin scenarios and exit");
  verify->add_option("--grid", cfg.overrides.grid, "evaluation points per axis")->check(CLI::PositiveNumber);
  verify->add_option("--restarts", cfg.overrides.restarts, "optimizer restarts")->check(CLI::PositiveNumber);
  verify->add_option("--seed", cfg.overrides.seed, "optimizer seed");
  verify->add_option("--tol-eq", cfg.overrides.tol_eq, "equality tolerance on the gap")->check(CLI::PositiveNumber);
  verify->add_option("--threads", cfg.overrides.threads, "worker threads")->check(CLI::PositiveNumber);
  verify->add_option("--report", cfg.report_path, "write the JSON report here");
  verify->add_option("--csv", cfg.csv_path, "write the per-point CSV sweep here");
  verify->add_flag("-v,--verbose", cfg.verbosity, "per-point and per-hypothesis lines");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : mixedcurv::kExitInput;
  }
  if (list) {
    for (const auto& n : mixedcurv::builtin_names()) std::cout << n << '\n';
    return 0;
  }
  if (!verify->parsed() || cfg.scenario.empty()) {
    std::cerr << app.help();
    return mixedcurv::kExitInput;
  }
  return mixedcurv::run(cfg, std::cout, std::cerr);
}
