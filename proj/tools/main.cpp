#include <CLI11.hpp>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "splithmc/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"splithmc: energy-preserving splitting-integrator HMC toolkit"};
  app.require_subcommand(1);

  // theory
  auto* theory_cmd =
      app.add_subcommand("theory", "Coefficient and step-size tables as CSV");
  bool presets = false;
  double b_single = 0.0, sigma = 1.0, h_single = 0.0;
  bool has_b = false, has_h = false;
  std::vector<double> grid_args;
  std::string theory_out;
  theory_cmd->add_flag("--presets", presets, "Print the four catalogued presets");
  theory_cmd->add_option("--b", b_single, "Evaluate a single family parameter")
      ->each([&has_b](const std::string&) { has_b = true; });
  theory_cmd->add_option("--sigma", sigma, "Scale ratio beta/alpha (default 1)");
  theory_cmd->add_option("--step", h_single, "Step size (defaults to the energy-null step)")
      ->each([&has_h](const std::string&) { has_h = true; });
  theory_cmd
      ->add_option("--b-grid", grid_args, "Evaluate a grid: lo hi count")
      ->expected(3);
  theory_cmd->add_option("--out", theory_out, "Write CSV to a file instead of stdout");

  // sample / adaptive
  std::string config_path, run_out;
  std::uint64_t seed_override = 0;
  bool has_seed = false, has_out = false, quiet = false;
  int chains = 1;
  auto add_run_options = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON experiment config")->required();
    cmd->add_option("--seed", seed_override, "Override the config seed")
        ->each([&has_seed](const std::string&) { has_seed = true; });
    cmd->add_option("--out", run_out, "Override the output directory")
        ->each([&has_out](const std::string&) { has_out = true; });
    cmd->add_option("--chains", chains, "Independent seeded chains run in parallel");
    cmd->add_flag("--quiet", quiet, "Suppress progress output");
  };
  auto* sample_cmd =
      app.add_subcommand("sample", "Run HMC with a fixed integrator from a config");
  add_run_options(sample_cmd);
  auto* adaptive_cmd =
      app.add_subcommand("adaptive", "Run the adaptive-b HMC driver from a config");
  add_run_options(adaptive_cmd);

  // verify
  auto* verify_cmd =
      app.add_subcommand("verify", "Run the linear-map identity self-checks");
  bool verify_quiet = false;
  verify_cmd->add_flag("--quiet", verify_quiet, "Only print failures");

  CLI11_PARSE(app, argc, argv);

  if (theory_cmd->parsed()) {
    splithmc::experiment::TheoryOptions opts;
    opts.presets = presets;
    if (has_b) opts.b = b_single;
    opts.sigma = sigma;
    if (has_h) opts.h = h_single;
    if (!grid_args.empty()) opts.b_grid = {grid_args[0], grid_args[1], grid_args[2]};
    if (!theory_out.empty()) opts.out = theory_out;
    if (!opts.presets && !opts.b && !opts.b_grid) {
      std::cerr << "theory: nothing to do (use --presets, --b, or --b-grid)\n";
      return 1;
    }
    return splithmc::experiment::cmd_theory(opts);
  }
  if (sample_cmd->parsed() || adaptive_cmd->parsed()) {
    splithmc::experiment::CliOverrides cli;
    if (has_seed) cli.seed = seed_override;
    if (has_out) cli.out = run_out;
    cli.chains = chains;
    cli.quiet = quiet;
    return splithmc::experiment::cmd_run(config_path, adaptive_cmd->parsed(), cli);
  }
  return splithmc::experiment::cmd_verify(verify_quiet);
}
