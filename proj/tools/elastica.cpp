#include "elastica/errors.hpp"
#include "elastica/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

using namespace elastica;

int main(int argc, char** argv) {
  CLI::App app{"Lagrangian free-boundary elastodynamics"};
  app.require_subcommand(1);
  std::string config, eta_file, v_file, out_dir;
  std::uint64_t seed = 0;

  auto* simulate = app.add_subcommand("simulate", "single run to t_end");
  simulate->add_option("--config", config)->required();
  auto* sweep = app.add_subcommand("sweep", "viscosity sweep, members in parallel");
  sweep->add_option("--config", config)->required();
  auto* mms = app.add_subcommand("mms", "manufactured-solution convergence table");
  mms->add_option("--config", config)->required();
  auto* audit = app.add_subcommand("audit", "identity audit on random maps");
  audit->add_option("--seed", seed)->required();
  audit->add_option("--out", out_dir, "also write audit.json here");
  auto* smooth = app.add_subcommand("smooth-init", "regularize initial data and build the forcing");
  smooth->add_option("--config", config)->required();
  auto* compat = app.add_subcommand("check-compat", "compatibility residuals of snapshot data");
  compat->add_option("--eta", eta_file)->required();
  compat->add_option("--v", v_file)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*simulate) return run_simulate(load_config(config, "simulate"));
    if (*sweep) return run_sweep(load_config(config, "sweep"));
    if (*mms) return run_mms(load_config(config, "mms"));
    if (*audit) return run_audit(seed, out_dir);
    if (*smooth) return run_smooth_init(load_config(config, "smooth-init"));
    if (*compat) return run_check_compat(eta_file, v_file, std::cout);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 1;
  }
  return 2;
}
