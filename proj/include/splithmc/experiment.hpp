#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "splithmc/diagnostics.hpp"
#include "splithmc/sampler.hpp"
#include "splithmc/targets.hpp"

// Experiment harness: JSON configs in, deterministic CSV/JSON artifacts out.
// Re-running a command with the same config and seed produces byte-identical
// payload files; wall-clock timing goes to a sidecar run.log.

namespace splithmc::experiment {

/// Invalid or unparseable configuration; the message carries a /json/pointer
/// style path to the offending key.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ParsedConfig {
  std::uint64_t seed = 0;
  std::string output_dir;  // may be empty; the CLI --out overrides
  nlohmann::json target;   // validated target block
  bool adaptive = false;
  AdaptiveSettings adapt;
  Scheme scheme = Scheme::StormerVerlet;
  double integrator_b = 0.0;
  double integrator_h = 0.0;
  HmcConfig hmc;          // integrator spec is filled per run
  std::string base_dir;   // directory of the config file, for relative paths
};

struct BuiltTarget {
  std::shared_ptr<TargetModel> model;  // the model the chain runs on
  // When sampling happens in decorrelated coordinates, maps sample rows back
  // to the target's natural coordinates (samples_out = samples * back_rows).
  std::optional<Eigen::MatrixXd> back_rows;
  std::shared_ptr<CoxTarget> cox;  // set for Cox targets
  std::string kind;
};

ParsedConfig parse_config_file(const std::string& path);
ParsedConfig parse_config_json(const nlohmann::json& j, const std::string& base_dir);

BuiltTarget build_target(const ParsedConfig& cfg);

struct RunResult {
  ChainOutput chain;  // samples already mapped to output coordinates
  ChainSummary summary;
  double wall_seconds = 0.0;
};

/// Run one chain with the given seed (chain i of a multi-chain run uses
/// base seed + i).
RunResult run_single(const ParsedConfig& cfg, const BuiltTarget& target, std::uint64_t seed);

/// Locale-independent shortest-faithful formatting used by every CSV writer.
std::string format_double(double v);

struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  int chains = 1;
  bool quiet = false;
};

/// `sample` / `adaptive` subcommands. adaptive_mode selects which config
/// style is required. Returns a process exit code (0 ok, 1 config, 2 runtime).
int cmd_run(const std::string& config_path, bool adaptive_mode, const CliOverrides& cli);

struct TheoryOptions {
  bool presets = false;
  std::optional<double> b;
  double sigma = 1.0;
  std::optional<double> h;  // defaults to the energy-null step when absent
  std::optional<std::array<double, 3>> b_grid;  // lo, hi, count
  std::optional<std::string> out;               // CSV path; stdout when absent
};

int cmd_theory(const TheoryOptions& opts);

/// Numerical self-check of the linear-map identities; prints one PASS/FAIL
/// line per identity. Returns 0 when everything passes, 2 otherwise.
int cmd_verify(bool quiet);

}  // namespace splithmc::experiment
