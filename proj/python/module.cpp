#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <span>

#include "splithmc/diagnostics.hpp"
#include "splithmc/integrators.hpp"
#include "splithmc/sampler.hpp"
#include "splithmc/targets.hpp"
#include "splithmc/theory.hpp"

namespace py = pybind11;
using namespace splithmc;

namespace {

Scheme scheme_from_string(const std::string& s) {
  if (s == "stormer-verlet") return Scheme::StormerVerlet;
  if (s == "split-family") return Scheme::SplitFamily;
  if (s == "scaled-split-family") return Scheme::ScaledSplitFamily;
  throw ContractError("unknown scheme '" + s + "'");
}

IntegratorSpec make_spec(const TargetModel& target, const std::string& scheme, double b,
                         double h, std::int64_t n_steps) {
  IntegratorSpec spec;
  spec.scheme = scheme_from_string(scheme);
  spec.b = b;
  spec.h = h;
  spec.n_steps = n_steps;
  if (spec.scheme == Scheme::ScaledSplitFamily) {
    const auto* diag = dynamic_cast<const GaussianDiagonalTarget*>(&target);
    if (diag == nullptr)
      throw ContractError("scaled-split-family requires a diagonal Gaussian target");
    spec.sigma_scale = diag->sigma_scale();
  }
  return spec;
}

HmcConfig make_config(std::int64_t n_samples, std::int64_t burn_in, double path_length,
                      double path_jitter, std::uint64_t seed, const std::string& initial) {
  HmcConfig cfg;
  cfg.n_samples = n_samples;
  cfg.burn_in = burn_in;
  cfg.path_length = path_length;
  cfg.path_jitter = path_jitter;
  cfg.seed = seed;
  if (initial == "zero") {
    cfg.initial = InitZero{};
  } else if (initial == "auto" || initial == "target") {
    cfg.initial = InitTargetDraw{};
  } else {
    throw ContractError("initial must be 'auto', 'target', or 'zero'");
  }
  return cfg;
}

py::array_t<double> to_array(const std::vector<double>& v) {
  py::array_t<double> arr(std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.size())});
  std::copy(v.begin(), v.end(), arr.mutable_data());
  return arr;
}

py::dict chain_to_dict(const ChainOutput& chain, std::int64_t burn_in) {
  py::dict out;
  out["samples"] = chain.samples;
  out["delta_h"] = to_array(chain.delta_h);
  py::array_t<bool> acc(std::vector<py::ssize_t>{static_cast<py::ssize_t>(chain.accepted.size())});
  auto acc_view = acc.mutable_unchecked<1>();
  for (py::ssize_t i = 0; i < acc.size(); ++i)
    acc_view(i) = chain.accepted[static_cast<std::size_t>(i)] != 0;
  out["accepted"] = acc;
  out["b"] = to_array(chain.b_used);
  out["h"] = to_array(chain.h_used);
  py::list trace;
  for (const auto& rec : chain.adaptation)
    trace.append(py::make_tuple(rec.iteration, rec.b, rec.h));
  out["adaptation"] = trace;
  out["seed"] = chain.seed;
  out["evaluation_failures"] = chain.evaluation_failures;
  if (chain.samples.rows() - burn_in >= 2) {
    const ChainSummary s = summarize(chain, burn_in);
    py::dict summary;
    summary["acceptance_rate"] = s.acceptance_rate;
    summary["mean_delta_h"] = s.mean_delta_h;
    summary["mean_abs_delta_h"] = s.mean_abs_delta_h;
    summary["ess_first"] = s.ess_first;
    summary["ess_mean"] = s.ess_mean;
    summary["ess_per_work"] = s.ess_per_work;
    summary["posterior_mean"] = s.posterior.mean;
    summary["posterior_sd"] = s.posterior.sd;
    summary["mean_h"] = s.mean_h;
    out["summary"] = summary;
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(splithmc, m) {
  m.doc() = "Energy-preserving splitting-integrator HMC toolkit";

  py::register_exception<ContractError>(m, "ContractError", PyExc_ValueError);
  py::register_exception<EvaluationError>(m, "EvaluationError", PyExc_ArithmeticError);

  // ---- linear theory ----
  py::class_<theory::LinearMapCoefficients>(m, "LinearMapCoefficients")
      .def_readonly("p", &theory::LinearMapCoefficients::p)
      .def_readonly("q", &theory::LinearMapCoefficients::q)
      .def_readonly("e", &theory::LinearMapCoefficients::e)
      .def_readonly("sigma", &theory::LinearMapCoefficients::sigma)
      .def_readonly("h_sigma", &theory::LinearMapCoefficients::h_sigma)
      .def("__repr__", [](const theory::LinearMapCoefficients& c) {
        return "LinearMapCoefficients(p=" + std::to_string(c.p) +
               ", q=" + std::to_string(c.q) + ", e=" + std::to_string(c.e) + ")";
      });

  m.attr("FAMILY_B_LOWER") = theory::kFamilyBLower;
  m.attr("FAMILY_B_UPPER") = theory::kFamilyBUpper;
  m.def("sv_coefficients", &theory::sv_coefficients, py::arg("h_sigma"),
        py::arg("sigma") = 1.0);
  m.def("family_coefficients", &theory::family_coefficients, py::arg("b"),
        py::arg("h_sigma"), py::arg("sigma") = 1.0);
  m.def("energy_residual", &theory::energy_residual, py::arg("b"), py::arg("h_sigma"));
  m.def("energy_null_step", &theory::energy_null_step, py::arg("b"),
        "Step size at which the splitting family preserves Gaussian energy exactly");
  m.def("stability_limit", &theory::stability_limit, py::arg("b"));
  m.def("family_presets", [] {
    py::list out;
    for (const auto& p : theory::family_presets()) {
      py::dict d;
      d["label"] = p.label;
      d["b"] = p.b;
      d["step"] = p.step;
      out.append(d);
    }
    return out;
  });
  m.def(
      "expected_energy_error",
      [](const theory::LinearMapCoefficients& c, std::int64_t n_steps) {
        const auto a = theory::expected_energy_error(c, n_steps);
        py::dict d;
        d["n_steps"] = a.n_steps;
        d["expected_delta"] = a.expected_delta;
        if (a.angle) d["angle"] = *a.angle;
        if (a.chi) d["chi"] = *a.chi;
        if (a.rho) d["rho"] = *a.rho;
        return d;
      },
      py::arg("coefficients"), py::arg("n_steps"));
  m.def(
      "multivariate_energy_residual",
      [](double b, const std::vector<double>& alphas, const std::vector<double>& betas) {
        return theory::multivariate_energy_residual(b, alphas, betas);
      },
      py::arg("b"), py::arg("alphas"), py::arg("betas"));

  // ---- targets ----
  py::class_<TargetModel, std::shared_ptr<TargetModel>>(m, "Target")
      .def_property_readonly("dimension", &TargetModel::dimension)
      .def("potential",
           [](const TargetModel& t, const std::vector<double>& q) {
             return t.potential(q);
           })
      .def("gradient", [](const TargetModel& t, const std::vector<double>& q) {
        std::vector<double> g(q.size());
        t.gradient(q, g);
        return g;
      });

  m.def(
      "neal_target",
      [](std::size_t d) -> std::shared_ptr<TargetModel> {
        return std::make_shared<GaussianDiagonalTarget>(neal_multivariate(d));
      },
      py::arg("dimension"));
  m.def(
      "gaussian_diagonal_target",
      [](const std::vector<double>& alphas) -> std::shared_ptr<TargetModel> {
        return std::make_shared<GaussianDiagonalTarget>(alphas);
      },
      py::arg("alphas"));
  m.def(
      "bivariate_target",
      [](double rho, bool decorrelate) -> std::shared_ptr<TargetModel> {
        const auto corr = bivariate_corr(rho);
        if (decorrelate)
          return std::make_shared<GaussianDiagonalTarget>(corr.decorrelated());
        return std::make_shared<GaussianCorrelatedTarget>(corr);
      },
      py::arg("rho"), py::arg("decorrelate") = true);
  m.def(
      "cox_synthetic_target",
      [](std::uint64_t seed, std::size_t grid, double sigma2, double beta,
         double intensity) -> std::shared_ptr<TargetModel> {
        return std::make_shared<CoxTarget>(
            synthesize_cox(seed, grid, sigma2, beta, intensity));
      },
      py::arg("seed"), py::arg("grid"), py::arg("sigma2"), py::arg("beta"),
      py::arg("intensity"));
  m.def(
      "logistic_synthetic_target",
      [](std::uint64_t seed, std::size_t instances,
         std::size_t covariates) -> std::shared_ptr<TargetModel> {
        return std::make_shared<LogisticTarget>(
            synthesize_logistic(seed, instances, covariates));
      },
      py::arg("seed"), py::arg("instances"), py::arg("covariates"));

  // ---- one trajectory ----
  m.def(
      "integrate",
      [](const std::shared_ptr<TargetModel>& target, const std::string& scheme, double b,
         double h, std::int64_t n_steps, const std::vector<double>& q,
         const std::vector<double>& p) {
        const IntegratorSpec spec = make_spec(*target, scheme, b, h, n_steps);
        const TrajectoryResult r = integrate(*target, spec, PhasePoint(q, p));
        py::dict out;
        out["q"] = r.end_state.q;
        out["p"] = r.end_state.p;
        out["delta_h"] = r.delta_h;
        out["gradient_evals"] = r.n_gradient_evals;
        return out;
      },
      py::arg("target"), py::arg("scheme"), py::arg("b"), py::arg("h"),
      py::arg("n_steps"), py::arg("q"), py::arg("p"));

  // ---- samplers ----
  m.def(
      "hmc_run",
      [](const std::shared_ptr<TargetModel>& target, const std::string& scheme, double b,
         double h, std::int64_t n_samples, std::int64_t burn_in, double path_length,
         double path_jitter, std::uint64_t seed, const std::string& initial) {
        HmcConfig cfg =
            make_config(n_samples, burn_in, path_length, path_jitter, seed, initial);
        cfg.integrator = make_spec(*target, scheme, b, h, 1);
        RngState rng(seed);
        return chain_to_dict(hmc_run(*target, cfg, rng), burn_in);
      },
      py::arg("target"), py::arg("scheme"), py::arg("b"), py::arg("h"),
      py::arg("n_samples"), py::arg("burn_in") = 0, py::arg("path_length") = 1.0,
      py::arg("path_jitter") = 0.0, py::arg("seed") = 0, py::arg("initial") = "auto");
  m.def(
      "hmc_run_adaptive",
      [](const std::shared_ptr<TargetModel>& target, double b_init, double reduction,
         bool reset_each_iteration, std::int64_t n_samples, std::int64_t burn_in,
         double path_length, double path_jitter, std::uint64_t seed,
         const std::string& initial) {
        HmcConfig cfg =
            make_config(n_samples, burn_in, path_length, path_jitter, seed, initial);
        AdaptiveSettings adapt{b_init, reduction, reset_each_iteration};
        RngState rng(seed);
        return chain_to_dict(hmc_run_adaptive(*target, cfg, adapt, rng), burn_in);
      },
      py::arg("target"), py::arg("b_init") = 0.25, py::arg("reduction") = 0.75,
      py::arg("reset_each_iteration") = false, py::arg("n_samples") = 1000,
      py::arg("burn_in") = 0, py::arg("path_length") = 5.0, py::arg("path_jitter") = 0.4,
      py::arg("seed") = 0, py::arg("initial") = "auto");

  // ---- diagnostics ----
  m.def(
      "ess",
      [](const std::vector<double>& series) { return ess(series); },
      py::arg("series"),
      "Effective sample size (initial positive sequence estimator)");
}
