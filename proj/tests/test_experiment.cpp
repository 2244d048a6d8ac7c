#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "splithmc/experiment.hpp"

using namespace splithmc;
using namespace splithmc::experiment;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json valid_config() {
  return json{
      {"seed", 77},
      {"target", {{"kind", "bivariate"}, {"rho", 0.95}, {"decorrelate", true}}},
      {"integrator", {{"scheme", "scaled-split-family"}, {"b", 0.2008}}},
      {"hmc",
       {{"samples", 300}, {"burn_in", 50}, {"path_length", 5.0}, {"path_jitter", 0.0}}},
  };
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("config: valid input parses") {
  const ParsedConfig cfg = parse_config_json(valid_config(), ".");
  CHECK(cfg.seed == 77);
  CHECK(cfg.scheme == Scheme::ScaledSplitFamily);
  CHECK(cfg.hmc.n_samples == 300);
  CHECK(!cfg.adaptive);
}

TEST_CASE("config: unknown keys are rejected with their path") {
  json j = valid_config();
  j["hmc"]["burnin"] = 10;
  CHECK_THROWS_WITH_AS(parse_config_json(j, "."), doctest::Contains("/hmc/burnin"),
                       ConfigError);

  json j2 = valid_config();
  j2["typo"] = 1;
  CHECK_THROWS_WITH_AS(parse_config_json(j2, "."), doctest::Contains("/typo"), ConfigError);
}

TEST_CASE("config: exactly one of integrator/adaptive") {
  json j = valid_config();
  j["adaptive"] = {{"b_init", 0.25}};
  CHECK_THROWS_AS(parse_config_json(j, "."), ConfigError);
  json j2 = valid_config();
  j2.erase("integrator");
  CHECK_THROWS_AS(parse_config_json(j2, "."), ConfigError);
}

TEST_CASE("config: value range checks carry json paths") {
  json j = valid_config();
  j["hmc"]["path_jitter"] = 1.0;
  CHECK_THROWS_WITH_AS(parse_config_json(j, "."), doctest::Contains("/hmc/path_jitter"),
                       ConfigError);

  json j2 = valid_config();
  j2.erase("integrator");
  j2["adaptive"] = {{"b_init", 0.25}};
  j2["hmc"]["path_length"] = 2.0;
  CHECK_THROWS_WITH_AS(parse_config_json(j2, "."), doctest::Contains("path_length"),
                       ConfigError);

  json j3 = valid_config();
  j3["target"]["rho"] = 1.5;
  CHECK_THROWS_WITH_AS(parse_config_json(j3, "."), doctest::Contains("/target/rho"),
                       ConfigError);
}

TEST_CASE("run: exact preservation gives unit acceptance; reruns are byte-identical") {
  const ParsedConfig cfg = parse_config_json(valid_config(), ".");
  const BuiltTarget target = build_target(cfg);
  const RunResult first = run_single(cfg, target, cfg.seed);
  CHECK(first.summary.acceptance_rate == 1.0);
  CHECK(first.summary.mean_abs_delta_h < 1e-11);
  // Sampling happened in decorrelated coordinates; outputs are mapped back.
  CHECK(first.chain.samples.cols() == 2);

  const RunResult again = run_single(cfg, target, cfg.seed);
  CHECK(first.chain.samples == again.chain.samples);

  // A different seed moves the samples but not the (exactly unit) rate.
  const RunResult other = run_single(cfg, target, cfg.seed + 5);
  CHECK(other.summary.acceptance_rate == 1.0);
  CHECK(first.chain.samples != other.chain.samples);
}

TEST_CASE("cmd_run writes deterministic artifacts") {
  const fs::path dir = temp_dir("splithmc_exp_run");
  const fs::path cfg_path = fs::temp_directory_path() / "splithmc_cfg.json";
  {
    json j = valid_config();
    j["hmc"]["samples"] = 120;
    j["hmc"]["burn_in"] = 20;
    std::ofstream out(cfg_path);
    out << j.dump(2);
  }
  CliOverrides cli;
  cli.out = dir.string();
  cli.quiet = true;
  REQUIRE(cmd_run(cfg_path.string(), false, cli) == 0);
  REQUIRE(fs::exists(dir / "chain.csv"));
  REQUIRE(fs::exists(dir / "summary.json"));
  const std::string chain1 = slurp(dir / "chain.csv");
  const std::string summary1 = slurp(dir / "summary.json");

  REQUIRE(cmd_run(cfg_path.string(), false, cli) == 0);
  CHECK(slurp(dir / "chain.csv") == chain1);
  CHECK(slurp(dir / "summary.json") == summary1);

  const json summary = json::parse(summary1);
  CHECK(summary["acceptance_rate"].get<double>() == 1.0);
  CHECK(summary["target"] == "bivariate");
}

TEST_CASE("cmd_run: adaptive Cox config writes adaptation and intensity artifacts") {
  const fs::path dir = temp_dir("splithmc_exp_cox");
  const fs::path cfg_path = fs::temp_directory_path() / "splithmc_cox_cfg.json";
  {
    const json j{
        {"seed", 5},
        {"target",
         {{"kind", "cox-synthetic"},
          {"grid", 4},
          {"sigma2", 1.0},
          {"beta", 0.3},
          {"intensity", 0.6},
          {"synth_seed", 9}}},
        {"adaptive", {{"b_init", 0.2113}, {"reduction", 0.6}}},
        {"hmc",
         {{"samples", 60}, {"burn_in", 10}, {"path_length", 3.0}, {"initial", "zero"}}},
    };
    std::ofstream out(cfg_path);
    out << j.dump(2);
  }
  CliOverrides cli;
  cli.out = dir.string();
  cli.quiet = true;
  REQUIRE(cmd_run(cfg_path.string(), true, cli) == 0);
  CHECK(fs::exists(dir / "chain.csv"));
  CHECK(fs::exists(dir / "adaptation.csv"));
  CHECK(fs::exists(dir / "intensity.csv"));

  // The sample subcommand must refuse an adaptive config.
  CHECK(cmd_run(cfg_path.string(), false, cli) == 1);
}

TEST_CASE("cmd_run: multiple chains write per-chain directories and a merged summary") {
  const fs::path dir = temp_dir("splithmc_exp_chains");
  const fs::path cfg_path = fs::temp_directory_path() / "splithmc_chains_cfg.json";
  {
    json j = valid_config();
    j["hmc"]["samples"] = 40;
    j["hmc"]["burn_in"] = 5;
    std::ofstream out(cfg_path);
    out << j.dump(2);
  }
  CliOverrides cli;
  cli.out = dir.string();
  cli.chains = 2;
  cli.quiet = true;
  REQUIRE(cmd_run(cfg_path.string(), false, cli) == 0);
  CHECK(fs::exists(dir / "chain_00" / "chain.csv"));
  CHECK(fs::exists(dir / "chain_01" / "chain.csv"));
  const json merged = json::parse(slurp(dir / "summary.json"));
  CHECK(merged["chains"] == 2);
  CHECK(merged["pooled"]["acceptance_rate"].get<double>() == 1.0);
  CHECK(slurp(dir / "chain_00" / "chain.csv") != slurp(dir / "chain_01" / "chain.csv"));
}

TEST_CASE("theory table flags out-of-domain parameters instead of failing") {
  const fs::path out_path = fs::temp_directory_path() / "splithmc_theory.csv";
  TheoryOptions opts;
  opts.b = 0.6;
  opts.out = out_path.string();
  REQUIRE(cmd_theory(opts) == 0);
  const std::string table = slurp(out_path);
  CHECK(table.find("out_of_domain") != std::string::npos);

  TheoryOptions presets;
  presets.presets = true;
  presets.out = out_path.string();
  REQUIRE(cmd_theory(presets) == 0);
  const std::string ptable = slurp(out_path);
  CHECK(ptable.find("b_stab") != std::string::npos);
  CHECK(ptable.find("2.8284271247461903") != std::string::npos);
}

TEST_CASE("format_double is shortest-faithful and locale-free") {
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
  const double v = 0.1 + 0.2;
  CHECK(std::stod(format_double(v)) == v);
}
