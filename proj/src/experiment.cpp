#include "splithmc/experiment.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>

#include "splithmc/theory.hpp"

namespace splithmc::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ConfigError("config error at " + path + ": " + msg);
}

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known) fail(path + "/" + it.key(), "unknown key");
  }
}

const json* find(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double get_number(const json& obj, const std::string& path, const char* key,
                  std::optional<double> fallback = std::nullopt) {
  const json* j = find(obj, key);
  if (j == nullptr) {
    if (fallback) return *fallback;
    fail(path + "/" + key, "missing required number");
  }
  if (!j->is_number()) fail(path + "/" + key, "expected a number");
  return j->get<double>();
}

std::int64_t get_integer(const json& obj, const std::string& path, const char* key,
                         std::optional<std::int64_t> fallback = std::nullopt) {
  const json* j = find(obj, key);
  if (j == nullptr) {
    if (fallback) return *fallback;
    fail(path + "/" + key, "missing required integer");
  }
  if (!j->is_number_integer()) fail(path + "/" + key, "expected an integer");
  return j->get<std::int64_t>();
}

bool get_bool(const json& obj, const std::string& path, const char* key, bool fallback) {
  const json* j = find(obj, key);
  if (j == nullptr) return fallback;
  if (!j->is_boolean()) fail(path + "/" + key, "expected a boolean");
  return j->get<bool>();
}

std::string get_string(const json& obj, const std::string& path, const char* key,
                       std::optional<std::string> fallback = std::nullopt) {
  const json* j = find(obj, key);
  if (j == nullptr) {
    if (fallback) return *fallback;
    fail(path + "/" + key, "missing required string");
  }
  if (!j->is_string()) fail(path + "/" + key, "expected a string");
  return j->get<std::string>();
}

void validate_target_block(const json& t) {
  if (!t.is_object()) fail("/target", "expected object");
  const std::string kind = get_string(t, "/target", "kind");
  if (kind == "neal") {
    check_keys(t, "/target", {"kind", "dimension"});
    if (get_integer(t, "/target", "dimension") < 1) fail("/target/dimension", "must be >= 1");
  } else if (kind == "gaussian-diagonal") {
    check_keys(t, "/target", {"kind", "alphas", "kinetic_variances"});
    const json* a = find(t, "alphas");
    if (a == nullptr || !a->is_array() || a->empty())
      fail("/target/alphas", "expected a non-empty array");
  } else if (kind == "bivariate") {
    check_keys(t, "/target", {"kind", "rho", "decorrelate"});
    const double rho = get_number(t, "/target", "rho");
    if (!(std::abs(rho) < 1.0)) fail("/target/rho", "|rho| must be < 1");
  } else if (kind == "cox") {
    check_keys(t, "/target", {"kind", "counts_csv", "sigma2", "beta", "mu"});
    get_string(t, "/target", "counts_csv");
    get_number(t, "/target", "sigma2");
    get_number(t, "/target", "beta");
  } else if (kind == "cox-synthetic") {
    check_keys(t, "/target", {"kind", "grid", "sigma2", "beta", "intensity", "synth_seed"});
    if (get_integer(t, "/target", "grid") < 2) fail("/target/grid", "must be >= 2");
    get_number(t, "/target", "sigma2");
    get_number(t, "/target", "beta");
    get_number(t, "/target", "intensity");
    get_integer(t, "/target", "synth_seed");
  } else if (kind == "logistic") {
    check_keys(t, "/target", {"kind", "csv", "has_header", "normalize", "prior_sigma2"});
    get_string(t, "/target", "csv");
  } else if (kind == "logistic-synthetic") {
    check_keys(t, "/target", {"kind", "instances", "covariates", "synth_seed"});
    if (get_integer(t, "/target", "instances") < 10)
      fail("/target/instances", "must be >= 10");
    if (get_integer(t, "/target", "covariates") < 1)
      fail("/target/covariates", "must be >= 1");
    get_integer(t, "/target", "synth_seed");
  } else {
    fail("/target/kind", "unknown target kind '" + kind + "'");
  }
}

Scheme parse_scheme(const std::string& s) {
  if (s == "stormer-verlet") return Scheme::StormerVerlet;
  if (s == "split-family") return Scheme::SplitFamily;
  if (s == "scaled-split-family") return Scheme::ScaledSplitFamily;
  fail("/integrator/scheme",
       "expected one of stormer-verlet | split-family | scaled-split-family");
}

InitialPosition parse_initial(const json& hmc_block) {
  const json* j = find(hmc_block, "initial");
  if (j == nullptr) return InitTargetDraw{};
  if (j->is_string()) {
    const auto s = j->get<std::string>();
    if (s == "auto" || s == "target") return InitTargetDraw{};
    if (s == "zero") return InitZero{};
    fail("/hmc/initial", "expected auto | zero | target | array of numbers");
  }
  if (j->is_array()) {
    std::vector<double> v;
    for (const auto& x : *j) {
      if (!x.is_number()) fail("/hmc/initial", "array entries must be numbers");
      v.push_back(x.get<double>());
    }
    return v;
  }
  fail("/hmc/initial", "expected auto | zero | target | array of numbers");
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  std::array<char, 64> buf{};
  const auto res =
      std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 17);
  return std::string(buf.data(), res.ptr);
}

ParsedConfig parse_config_json(const json& j, const std::string& base_dir) {
  if (!j.is_object()) fail("/", "top-level config must be an object");
  check_keys(j, "", {"seed", "output", "target", "integrator", "adaptive", "hmc"});

  ParsedConfig cfg;
  cfg.base_dir = base_dir;
  const std::int64_t seed = get_integer(j, "", "seed");
  if (seed < 0) fail("/seed", "must be >= 0");
  cfg.seed = static_cast<std::uint64_t>(seed);
  cfg.output_dir = get_string(j, "", "output", std::string());

  const json* t = find(j, "target");
  if (t == nullptr) fail("/target", "missing required block");
  validate_target_block(*t);
  cfg.target = *t;

  const json* integ = find(j, "integrator");
  const json* adapt = find(j, "adaptive");
  if ((integ == nullptr) == (adapt == nullptr))
    fail("/", "exactly one of 'integrator' or 'adaptive' must be present");
  if (integ != nullptr) {
    check_keys(*integ, "/integrator", {"scheme", "h", "b"});
    cfg.scheme = parse_scheme(get_string(*integ, "/integrator", "scheme"));
    if (cfg.scheme != Scheme::ScaledSplitFamily) {
      cfg.integrator_h = get_number(*integ, "/integrator", "h");
      if (!(cfg.integrator_h > 0.0)) fail("/integrator/h", "must be > 0");
    } else {
      cfg.integrator_h = get_number(*integ, "/integrator", "h", 0.0);
    }
    if (cfg.scheme != Scheme::StormerVerlet) {
      cfg.integrator_b = get_number(*integ, "/integrator", "b");
    }
  } else {
    check_keys(*adapt, "/adaptive", {"b_init", "reduction", "reset_each_iteration"});
    cfg.adaptive = true;
    cfg.adapt.b_init = get_number(*adapt, "/adaptive", "b_init");
    cfg.adapt.reduction = get_number(*adapt, "/adaptive", "reduction", 0.75);
    cfg.adapt.reset_each_iteration =
        get_bool(*adapt, "/adaptive", "reset_each_iteration", false);
    if (!(cfg.adapt.b_init > theory::kFamilyBLower) ||
        !(cfg.adapt.b_init <= theory::kFamilyBUpper))
      fail("/adaptive/b_init", "must lie in ((3-sqrt(5))/4, 1/4]");
    if (!(cfg.adapt.reduction > 0.0) || !(cfg.adapt.reduction < 1.0))
      fail("/adaptive/reduction", "must lie in (0, 1)");
  }

  const json* hmc = find(j, "hmc");
  if (hmc == nullptr) fail("/hmc", "missing required block");
  check_keys(*hmc, "/hmc",
             {"samples", "burn_in", "path_length", "path_jitter", "initial",
              "max_trajectory_steps"});
  cfg.hmc.n_samples = get_integer(*hmc, "/hmc", "samples");
  if (cfg.hmc.n_samples < 0) fail("/hmc/samples", "must be >= 0");
  cfg.hmc.burn_in = get_integer(*hmc, "/hmc", "burn_in", 0);
  if (cfg.hmc.burn_in < 0 ||
      (cfg.hmc.n_samples > 0 && cfg.hmc.burn_in >= cfg.hmc.n_samples))
    fail("/hmc/burn_in", "must satisfy 0 <= burn_in < samples");
  cfg.hmc.path_length = get_number(*hmc, "/hmc", "path_length");
  if (!(cfg.hmc.path_length > 0.0)) fail("/hmc/path_length", "must be > 0");
  cfg.hmc.path_jitter = get_number(*hmc, "/hmc", "path_jitter", 0.0);
  if (!(cfg.hmc.path_jitter >= 0.0) || cfg.hmc.path_jitter >= 1.0)
    fail("/hmc/path_jitter", "must lie in [0, 1)");
  cfg.hmc.initial = parse_initial(*hmc);
  cfg.hmc.max_trajectory_steps =
      get_integer(*hmc, "/hmc", "max_trajectory_steps", 1'000'000);
  if (cfg.hmc.max_trajectory_steps < 1) fail("/hmc/max_trajectory_steps", "must be >= 1");
  if (cfg.adaptive && cfg.hmc.path_length < 3.0)
    fail("/hmc/path_length", "adaptive mode requires path_length >= 3");
  cfg.hmc.seed = cfg.seed;
  return cfg;
}

ParsedConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config error: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config error: " + std::string(e.what()));
  }
  return parse_config_json(j, fs::path(path).parent_path().string());
}

BuiltTarget build_target(const ParsedConfig& cfg) {
  const json& t = cfg.target;
  const std::string kind = t.at("kind").get<std::string>();
  BuiltTarget built;
  built.kind = kind;

  auto resolve = [&cfg](const std::string& p) {
    fs::path fp(p);
    if (fp.is_relative() && !cfg.base_dir.empty()) fp = fs::path(cfg.base_dir) / fp;
    return fp.string();
  };

  if (kind == "neal") {
    built.model = std::make_shared<GaussianDiagonalTarget>(
        neal_multivariate(static_cast<std::size_t>(t.at("dimension").get<std::int64_t>())));
  } else if (kind == "gaussian-diagonal") {
    std::vector<double> alphas = t.at("alphas").get<std::vector<double>>();
    if (const json* kv = find(t, "kinetic_variances")) {
      built.model = std::make_shared<GaussianDiagonalTarget>(
          std::move(alphas), DiagonalMetric(kv->get<std::vector<double>>()));
    } else {
      built.model = std::make_shared<GaussianDiagonalTarget>(std::move(alphas));
    }
  } else if (kind == "bivariate") {
    const auto corr = bivariate_corr(t.at("rho").get<double>());
    const bool decorrelate = !t.contains("decorrelate") || t.at("decorrelate").get<bool>();
    if (decorrelate) {
      built.model = std::make_shared<GaussianDiagonalTarget>(corr.decorrelated());
      built.back_rows = corr.eigenvectors();  // rows map q back to x
    } else {
      built.model = std::make_shared<GaussianCorrelatedTarget>(corr);
    }
  } else if (kind == "cox") {
    std::size_t grid = 0;
    auto counts = load_count_grid(resolve(t.at("counts_csv").get<std::string>()), grid);
    std::optional<double> mu;
    if (t.contains("mu")) mu = t.at("mu").get<double>();
    built.cox = std::make_shared<CoxTarget>(grid, std::move(counts),
                                            t.at("sigma2").get<double>(),
                                            t.at("beta").get<double>(), mu);
    built.model = built.cox;
  } else if (kind == "cox-synthetic") {
    built.cox = std::make_shared<CoxTarget>(synthesize_cox(
        static_cast<std::uint64_t>(t.at("synth_seed").get<std::int64_t>()),
        static_cast<std::size_t>(t.at("grid").get<std::int64_t>()),
        t.at("sigma2").get<double>(), t.at("beta").get<double>(),
        t.at("intensity").get<double>()));
    built.model = built.cox;
  } else if (kind == "logistic") {
    LogisticLoadOptions opts;
    opts.has_header = !t.contains("has_header") ? false : t.at("has_header").get<bool>();
    opts.normalize = !t.contains("normalize") ? true : t.at("normalize").get<bool>();
    opts.prior_sigma2 = !t.contains("prior_sigma2") ? 1.0 : t.at("prior_sigma2").get<double>();
    built.model = std::make_shared<LogisticTarget>(
        load_logistic_csv(resolve(t.at("csv").get<std::string>()), opts));
  } else if (kind == "logistic-synthetic") {
    built.model = std::make_shared<LogisticTarget>(synthesize_logistic(
        static_cast<std::uint64_t>(t.at("synth_seed").get<std::int64_t>()),
        static_cast<std::size_t>(t.at("instances").get<std::int64_t>()),
        static_cast<std::size_t>(t.at("covariates").get<std::int64_t>())));
  } else {
    throw ConfigError("config error at /target/kind: unknown target kind");
  }
  return built;
}

RunResult run_single(const ParsedConfig& cfg, const BuiltTarget& target, std::uint64_t seed) {
  HmcConfig hmc = cfg.hmc;
  hmc.seed = seed;
  if (!cfg.adaptive) {
    hmc.integrator.scheme = cfg.scheme;
    hmc.integrator.b = cfg.integrator_b;
    hmc.integrator.h = cfg.integrator_h;
    if (cfg.scheme == Scheme::ScaledSplitFamily) {
      const auto* diag = dynamic_cast<const GaussianDiagonalTarget*>(target.model.get());
      if (diag == nullptr)
        throw ConfigError(
            "config error at /integrator/scheme: scaled-split-family requires a "
            "diagonal Gaussian target (use \"decorrelate\": true for correlated ones)");
      hmc.integrator.sigma_scale = diag->sigma_scale();
    }
  }

  RngState rng(seed);
  const auto t0 = std::chrono::steady_clock::now();
  ChainOutput chain = cfg.adaptive ? hmc_run_adaptive(*target.model, hmc, cfg.adapt, rng)
                                   : hmc_run(*target.model, hmc, rng);
  const auto t1 = std::chrono::steady_clock::now();

  if (target.back_rows && chain.samples.rows() > 0)
    chain.samples = (chain.samples * (*target.back_rows)).eval();

  RunResult res{std::move(chain), {}, std::chrono::duration<double>(t1 - t0).count()};
  if (res.chain.samples.rows() - cfg.hmc.burn_in >= 2)
    res.summary = summarize(res.chain, cfg.hmc.burn_in);
  return res;
}

namespace {

json summary_to_json(const ParsedConfig& cfg, const RunResult& r, std::uint64_t seed) {
  json s;
  s["seed"] = seed;
  s["target"] = cfg.target.at("kind").get<std::string>();
  s["mode"] = cfg.adaptive ? "adaptive" : "fixed";
  s["samples"] = cfg.hmc.n_samples;
  s["burn_in"] = cfg.hmc.burn_in;
  s["acceptance_rate"] = r.summary.acceptance_rate;
  s["mean_delta_h"] = r.summary.mean_delta_h;
  s["mean_abs_delta_h"] = r.summary.mean_abs_delta_h;
  s["ess_first"] = r.summary.ess_first;
  s["ess_mean"] = r.summary.ess_mean;
  s["ess_per_work"] = r.summary.ess_per_work;
  s["mean_h"] = r.summary.mean_h;
  s["evaluation_failures"] = r.chain.evaluation_failures;
  s["total_gradient_evals"] = r.chain.total_gradient_evals;
  s["posterior_mean"] = std::vector<double>(
      r.summary.posterior.mean.data(),
      r.summary.posterior.mean.data() + r.summary.posterior.mean.size());
  s["posterior_sd"] = std::vector<double>(
      r.summary.posterior.sd.data(),
      r.summary.posterior.sd.data() + r.summary.posterior.sd.size());
  if (cfg.adaptive && !r.chain.adaptation.empty()) {
    s["final_b"] = r.chain.adaptation.back().b;
    s["final_h"] = r.chain.adaptation.back().h;
  }
  return s;
}

void write_chain_csv(const fs::path& path, const ChainOutput& chain) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const Eigen::Index d = chain.samples.cols();
  out << "iteration";
  for (Eigen::Index c = 0; c < d; ++c) out << ",q_" << c;
  out << ",delta_h,accepted,b,h\n";
  for (Eigen::Index i = 0; i < chain.samples.rows(); ++i) {
    out << (i + 1);
    for (Eigen::Index c = 0; c < d; ++c) out << ',' << format_double(chain.samples(i, c));
    const auto idx = static_cast<std::size_t>(i);
    out << ',' << format_double(chain.delta_h[idx]) << ','
        << static_cast<int>(chain.accepted[idx]) << ',' << format_double(chain.b_used[idx])
        << ',' << format_double(chain.h_used[idx]) << '\n';
  }
}

void write_adaptation_csv(const fs::path& path, const ChainOutput& chain) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "iteration,b,h\n";
  for (const auto& rec : chain.adaptation)
    out << rec.iteration << ',' << format_double(rec.b) << ',' << format_double(rec.h)
        << '\n';
}

void write_intensity_csv(const fs::path& path, const ChainOutput& chain,
                         const CoxTarget& cox, std::int64_t burn_in) {
  const Eigen::Index kept = chain.samples.rows() - burn_in;
  if (kept < 1) return;
  const Eigen::MatrixXd grid = cox_intensity_map(chain.samples.bottomRows(kept), cox);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (Eigen::Index i = 0; i < grid.rows(); ++i) {
    for (Eigen::Index k = 0; k < grid.cols(); ++k) {
      if (k > 0) out << ',';
      out << format_double(grid(i, k));
    }
    out << '\n';
  }
}

void write_run_outputs(const fs::path& dir, const ParsedConfig& cfg, const BuiltTarget& target,
                       const RunResult& r, std::uint64_t seed) {
  fs::create_directories(dir);
  write_chain_csv(dir / "chain.csv", r.chain);
  std::ofstream summary(dir / "summary.json");
  summary << summary_to_json(cfg, r, seed).dump(2) << '\n';
  if (cfg.adaptive) write_adaptation_csv(dir / "adaptation.csv", r.chain);
  if (target.cox != nullptr)
    write_intensity_csv(dir / "intensity.csv", r.chain, *target.cox, cfg.hmc.burn_in);
  std::ofstream log(dir / "run.log");
  log << "wall_seconds=" << r.wall_seconds << '\n';
}

}  // namespace

int cmd_run(const std::string& config_path, bool adaptive_mode, const CliOverrides& cli) {
  try {
    ParsedConfig cfg = parse_config_file(config_path);
    if (adaptive_mode && !cfg.adaptive)
      throw ConfigError("config error at /adaptive: the adaptive subcommand needs an "
                        "'adaptive' block");
    if (!adaptive_mode && cfg.adaptive)
      throw ConfigError("config error at /integrator: the sample subcommand needs an "
                        "'integrator' block");
    if (cli.seed) {
      cfg.seed = *cli.seed;
      cfg.hmc.seed = *cli.seed;
    }
    if (cli.out) cfg.output_dir = *cli.out;
    if (cfg.output_dir.empty())
      throw ConfigError("config error at /output: no output directory (config 'output' "
                        "or --out)");
    if (cli.chains < 1) throw ConfigError("config error: --chains must be >= 1");

    const BuiltTarget target = build_target(cfg);

    std::vector<std::future<RunResult>> futures;
    futures.reserve(static_cast<std::size_t>(cli.chains));
    for (int c = 0; c < cli.chains; ++c) {
      const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(c);
      futures.push_back(std::async(std::launch::async, [&cfg, &target, seed] {
        return run_single(cfg, target, seed);
      }));
    }
    std::vector<RunResult> results;
    results.reserve(futures.size());
    for (auto& f : futures) results.push_back(f.get());

    const fs::path outdir(cfg.output_dir);
    if (cli.chains == 1) {
      write_run_outputs(outdir, cfg, target, results[0], cfg.seed);
    } else {
      fs::create_directories(outdir);
      json merged;
      merged["seed"] = cfg.seed;
      merged["chains"] = cli.chains;
      json per_chain = json::array();
      double ar = 0.0, dh = 0.0, adh = 0.0;
      for (int c = 0; c < cli.chains; ++c) {
        char name[32];
        std::snprintf(name, sizeof(name), "chain_%02d", c);
        const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(c);
        write_run_outputs(outdir / name, cfg, target, results[static_cast<std::size_t>(c)],
                          seed);
        per_chain.push_back(
            summary_to_json(cfg, results[static_cast<std::size_t>(c)], seed));
        ar += results[static_cast<std::size_t>(c)].summary.acceptance_rate;
        dh += results[static_cast<std::size_t>(c)].summary.mean_delta_h;
        adh += results[static_cast<std::size_t>(c)].summary.mean_abs_delta_h;
      }
      merged["per_chain"] = per_chain;
      merged["pooled"]["acceptance_rate"] = ar / cli.chains;
      merged["pooled"]["mean_delta_h"] = dh / cli.chains;
      merged["pooled"]["mean_abs_delta_h"] = adh / cli.chains;
      std::ofstream out(outdir / "summary.json");
      out << merged.dump(2) << '\n';
    }

    if (!cli.quiet) {
      for (std::size_t c = 0; c < results.size(); ++c) {
        const auto& s = results[c].summary;
        std::cout << "chain " << c << ": AR=" << s.acceptance_rate
                  << " mean|dH|=" << s.mean_abs_delta_h << " ESS(q1)=" << s.ess_first
                  << " wall=" << results[c].wall_seconds << "s\n";
      }
      std::cout << "outputs written to " << cfg.output_dir << '\n';
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

namespace {

void theory_row(std::ostream& out, const std::string& label, double b, double sigma,
                std::optional<double> h_opt) {
  double h = 0.0;
  std::string status = "ok";
  if (h_opt) {
    h = *h_opt;
  } else {
    try {
      h = theory::energy_null_step(b);
    } catch (const std::domain_error&) {
      out << label << ',' << format_double(b) << ",,,,,,,out_of_domain\n";
      return;
    }
  }
  const theory::LinearMapCoefficients c =
      (b == 0.0 || b == 0.5) ? theory::sv_coefficients(h, sigma)
                             : theory::family_coefficients(b, h, sigma);
  const double sum_sigma = sigma + 1.0 / sigma;
  const double expected_per_step = 0.5 * sum_sigma * sum_sigma * c.e * c.e;
  const std::string limit =
      (b > 0.0 && b < 0.5) ? format_double(theory::stability_limit(b)) : std::string();
  out << label << ',' << format_double(b) << ',' << format_double(h) << ','
      << format_double(c.p) << ',' << format_double(c.q) << ',' << format_double(c.e) << ','
      << limit << ',' << format_double(expected_per_step) << ',' << status << '\n';
}

}  // namespace

int cmd_theory(const TheoryOptions& opts) {
  try {
    std::ofstream file;
    if (opts.out) {
      file.open(*opts.out);
      if (!file) throw std::runtime_error("cannot open " + *opts.out + " for writing");
    }
    std::ostream& out = opts.out ? file : std::cout;
    out << "label,b,h_b,p,q,e,stability_limit,expected_delta_per_step,status\n";
    if (opts.presets) {
      for (const auto& preset : theory::family_presets())
        theory_row(out, preset.label, preset.b, opts.sigma, std::nullopt);
    }
    if (opts.b) theory_row(out, "b", *opts.b, opts.sigma, opts.h);
    if (opts.b_grid) {
      const auto [lo, hi, count_d] = *opts.b_grid;
      const int count = static_cast<int>(count_d);
      if (count < 2 || !(hi > lo))
        throw ConfigError("config error: --b-grid needs lo < hi and count >= 2");
      for (int i = 0; i < count; ++i) {
        const double b = lo + (hi - lo) * static_cast<double>(i) / (count - 1);
        theory_row(out, "grid", b, opts.sigma, std::nullopt);
      }
    }
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

namespace {

struct Check {
  std::string name;
  double worst = 0.0;
  double tolerance = 0.0;
  bool passed() const { return worst <= tolerance; }
};

// Builds the family map by multiplying the five shear matrices on the test
// problem with alpha = 1, beta = sigma; independent of the coefficient
// formulas it cross-checks.
std::array<std::array<double, 2>, 2> composed_family_matrix(double b, double h_sigma,
                                                            double sigma) {
  using Mat = std::array<std::array<double, 2>, 2>;
  auto mul = [](const Mat& a, const Mat& m) {
    Mat r{};
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) r[i][j] = a[i][0] * m[0][j] + a[i][1] * m[1][j];
    return r;
  };
  const double h = h_sigma * sigma;  // alpha = 1, beta = sigma
  const double inv_b2 = 1.0 / (sigma * sigma);
  auto kick = [](double t) { return Mat{{{1.0, 0.0}, {-t, 1.0}}}; };
  auto drift = [inv_b2](double t) { return Mat{{{1.0, t * inv_b2}, {0.0, 1.0}}}; };
  Mat m = kick(b * h);
  m = mul(drift(0.5 * h), m);
  m = mul(kick((1.0 - 2.0 * b) * h), m);
  m = mul(drift(0.5 * h), m);
  m = mul(kick(b * h), m);
  return m;
}

}  // namespace

int cmd_verify(bool quiet) {
  std::vector<Check> checks;
  const std::vector<double> sigmas{0.1, 1.0, 10.0};
  std::vector<double> b_grid;
  for (int k = 1; k <= 20; ++k)
    b_grid.push_back(theory::kFamilyBLower +
                     (theory::kFamilyBUpper - theory::kFamilyBLower) * k / 20.0);

  {
    Check c{"det-identity", 0.0, 1e-12};
    for (double sigma : sigmas)
      for (double h : {0.1, 0.5, 1.0, 1.9})
        for (double b : {0.1, 0.2008, 0.25, 0.35}) {
          c.worst = std::max(c.worst, std::abs(theory::det_identity_residual(
                                          theory::sv_coefficients(h, sigma))));
          c.worst = std::max(c.worst, std::abs(theory::det_identity_residual(
                                          theory::family_coefficients(b, h, sigma))));
        }
    checks.push_back(c);
  }
  {
    Check c{"composition-oracle", 0.0, 1e-12};
    for (double sigma : sigmas)
      for (double h : {0.1, 0.7, 1.4})
        for (double b : {0.12, 0.2008, 0.25, 0.4}) {
          const auto lhs = theory::one_step_matrix(theory::family_coefficients(b, h, sigma));
          const auto rhs = composed_family_matrix(b, h, sigma);
          for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
              c.worst = std::max(c.worst, std::abs(lhs[i][j] - rhs[i][j]));
        }
    checks.push_back(c);
  }
  {
    Check c{"energy-null-step", 0.0, 1e-13};
    for (double b : b_grid)
      for (double sigma : sigmas)
        c.worst = std::max(
            c.worst,
            std::abs(theory::family_coefficients(b, theory::energy_null_step(b), sigma).e));
    checks.push_back(c);
  }
  {
    Check c{"error-matrix-null", 0.0, 1e-12};
    for (double b : b_grid)
      for (double alpha : {0.5, 1.0, 2.0})
        for (double beta : {0.5, 1.0, 3.0}) {
          const auto coeff =
              theory::family_coefficients(b, theory::energy_null_step(b), beta / alpha);
          const auto mat = theory::energy_error_matrix(coeff, alpha, beta);
          for (const auto& row : mat)
            for (double v : row) c.worst = std::max(c.worst, std::abs(v));
        }
    checks.push_back(c);
  }
  {
    Check c{"expectation-forms", 0.0, 1e-10};
    for (double sigma : sigmas)
      for (double h : {0.2, 0.5, 1.0, 1.8}) {
        const auto coeff = theory::sv_coefficients(h, sigma);
        const auto analysis = theory::expected_energy_error(coeff, 7);
        if (std::abs(coeff.p) < 1.0 - 1e-8 && analysis.rho) {
          const double trig = 7.0 * (1.0 - coeff.p * coeff.p) * *analysis.rho;
          c.worst = std::max(c.worst, std::abs(trig - analysis.expected_delta) /
                                          std::max(1.0, analysis.expected_delta));
        }
      }
    checks.push_back(c);
  }
  {
    Check c{"stability-bound", 0.0, 1e-12};
    for (double b : b_grid)
      c.worst =
          std::max(c.worst, theory::energy_null_step(b) - theory::stability_limit(b));
    checks.push_back(c);
  }
  {
    Check c{"multivariate-null", 0.0, 1e-12};
    for (std::size_t d : {std::size_t{1}, std::size_t{2}, std::size_t{16}, std::size_t{64}}) {
      std::vector<double> alphas(d), betas(d, 1.0);
      for (std::size_t j = 0; j < d; ++j) {
        const double jj = static_cast<double>(j + 1);
        alphas[j] = 1.0 / (jj * jj);
      }
      for (double b : {0.1968, 0.2008, 0.21132486540518713, 0.25})
        c.worst = std::max(c.worst, theory::multivariate_energy_residual(b, alphas, betas));
    }
    checks.push_back(c);
  }

  bool all_ok = true;
  for (const auto& c : checks) {
    all_ok = all_ok && c.passed();
    if (!quiet || !c.passed())
      std::cout << (c.passed() ? "PASS " : "FAIL ") << c.name
                << " (max residual " << format_double(c.worst) << ", tolerance "
                << format_double(c.tolerance) << ")\n";
  }
  if (!quiet) std::cout << (all_ok ? "verify: all checks passed\n" : "verify: FAILURES\n");
  return all_ok ? 0 : 2;
}

}  // namespace splithmc::experiment
