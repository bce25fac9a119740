#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dtnwave/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"DtN-map marching solver for piecewise-uniform 2D waveguides"};
  app.set_version_flag("--version", dtnwave::kVersion);
  app.require_subcommand(1);

  std::string config, out;
  bool dump_fields = false;
  dtnwave::SweepSpec sweep;
  int jobs = 1;
  dtnwave::VerifyOptions verify;

  auto* solve = app.add_subcommand("solve", "Solve one configuration");
  solve->add_option("--config", config, "Problem configuration (JSON)")->required();
  solve->add_option("--out", out, "Output directory")->required();
  solve->add_flag("--dump-fields", dump_fields, "Write field_z*.csv per interface");

  auto* sw = app.add_subcommand("sweep", "Wavelength sweep of a configuration");
  sw->add_option("--config", config, "Problem configuration (JSON)")->required();
  sw->add_option("--out", out, "Output CSV path")->required();
  sw->add_option("--lambda-min", sweep.lambda_min, "Shortest wavelength (um)")->required();
  sw->add_option("--lambda-max", sweep.lambda_max, "Longest wavelength (um)")->required();
  sw->add_option("--steps", sweep.steps, "Number of wavelengths")->required();
  sw->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);

  auto* ver = app.add_subcommand("verify", "Compare the march against the global oracle");
  ver->add_option("--config", config, "Problem configuration (JSON)")->required();
  ver->add_option("--tolerance", verify.tolerance, "Pass threshold on the discrepancy");
  ver->add_option("--oracle-cap", verify.max_unknowns, "Maximum oracle unknowns");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : dtnwave::kExitConfig;
  }

  if (*solve) return dtnwave::run_solve(config, out, dump_fields, std::cout, std::cerr);
  if (*sw) return dtnwave::run_sweep(config, sweep, out, jobs, std::cout, std::cerr);
  return dtnwave::run_verify(config, verify, std::cout, std::cerr);
}
