#include "splithmc/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "splithmc/theory.hpp"

namespace splithmc {

namespace {

std::vector<double> initial_position(const TargetModel& target, const InitialPosition& init,
                                     RngState& rng) {
  const std::size_t d = target.dimension();
  if (std::holds_alternative<InitZero>(init)) return std::vector<double>(d, 0.0);
  if (std::holds_alternative<InitTargetDraw>(init)) {
    std::vector<double> q(d, 0.0);
    target.draw_exact(rng, q);  // falls through to zero when unsupported
    return q;
  }
  const auto& given = std::get<std::vector<double>>(init);
  if (given.size() != d)
    throw ContractError("hmc: supplied initial position has wrong dimension");
  for (double v : given)
    if (!std::isfinite(v)) throw ContractError("hmc: initial position must be finite");
  return given;
}

void validate_common(const TargetModel& target, const HmcConfig& cfg) {
  if (target.dimension() < 1) throw ContractError("hmc: empty target");
  if (cfg.n_samples < 0) throw ContractError("hmc: n_samples must be >= 0");
  if (cfg.burn_in < 0 || (cfg.n_samples > 0 && cfg.burn_in >= cfg.n_samples))
    throw ContractError("hmc: burn_in must satisfy 0 <= burn_in < n_samples");
  if (!(cfg.path_length > 0.0)) throw ContractError("hmc: path_length must be > 0");
  if (!(cfg.path_jitter >= 0.0) || cfg.path_jitter >= 1.0)
    throw ContractError("hmc: path_jitter must lie in [0, 1)");
  if (cfg.max_trajectory_steps < 1)
    throw ContractError("hmc: max_trajectory_steps must be >= 1");
}

struct IterationPlan {
  Scheme scheme;
  double b;
  double h;
  const std::vector<double>* sigma_scale;  // null unless scaled scheme
};

// One Metropolis iteration: draw momentum, integrate over a randomized path
// length (re-drawn in the rare case the trajectory lands exactly on its
// start), accept or reject.
struct IterationResult {
  bool accepted = false;
  bool eval_failed = false;
  double delta_h = std::numeric_limits<double>::quiet_NaN();
  std::int64_t gradient_evals = 0;
};

IterationResult run_iteration(const TargetModel& target, const HmcConfig& cfg,
                              const IterationPlan& plan, std::vector<double>& q,
                              RngState& rng) {
  IterationResult out;
  const std::vector<double> p = draw_momentum(target.kinetic_metric(), rng);

  IntegratorSpec spec;
  spec.scheme = plan.scheme;
  spec.b = plan.b;
  spec.h = plan.h;
  if (plan.sigma_scale != nullptr) spec.sigma_scale = *plan.sigma_scale;

  const PhasePoint start(q, p);
  for (int attempt = 0; attempt < 100; ++attempt) {
    double t_star = cfg.path_length;
    if (cfg.path_jitter > 0.0)
      t_star = rng.uniform(cfg.path_length * (1.0 - cfg.path_jitter),
                           cfg.path_length * (1.0 + cfg.path_jitter));
    spec.n_steps = std::min(choose_steps(t_star, plan.h), cfg.max_trajectory_steps);

    TrajectoryResult traj{PhasePoint({0.0}, {0.0}), 0.0, 0};
    try {
      traj = integrate(target, spec, start);
    } catch (const EvaluationError&) {
      out.eval_failed = true;
      return out;
    }
    out.gradient_evals += traj.n_gradient_evals;

    // Ergodicity guard: an exact return to the start forces a new path length.
    if (traj.end_state.q == start.q && traj.end_state.p == start.p) continue;

    out.delta_h = traj.delta_h;
    const double alpha = std::min(1.0, std::exp(-traj.delta_h));
    const double u = rng.uniform();
    if (alpha > u) {
      out.accepted = true;
      q = traj.end_state.q;
    }
    return out;
  }
  // A persistent fixed point (measure zero); treat as a rejected proposal.
  return out;
}

ChainOutput run_chain(const TargetModel& target, const HmcConfig& cfg,
                      const AdaptiveSettings* adapt, RngState& rng) {
  validate_common(target, cfg);
  const std::size_t d = target.dimension();

  IterationPlan plan{};
  double factor = 0.0;
  const double b_floor = theory::kFamilyBLower;
  if (adapt != nullptr) {
    if (cfg.path_length < 3.0)
      throw ContractError("hmc_run_adaptive: path_length must be >= 3");
    if (!(adapt->b_init > b_floor) || !(adapt->b_init <= theory::kFamilyBUpper))
      throw ContractError("hmc_run_adaptive: b_init must lie in ((3-sqrt(5))/4, 1/4]");
    if (!(adapt->reduction > 0.0) || !(adapt->reduction < 1.0))
      throw ContractError("hmc_run_adaptive: reduction must lie in (0, 1)");
    factor = adapt->b_init - b_floor;
    plan.scheme = Scheme::SplitFamily;
    plan.b = adapt->b_init;
    plan.h = theory::energy_null_step(plan.b);
    plan.sigma_scale = nullptr;
  } else {
    plan.scheme = cfg.integrator.scheme;
    plan.b = cfg.integrator.b;
    plan.h = cfg.integrator.scheme == Scheme::ScaledSplitFamily
                 ? theory::energy_null_step(cfg.integrator.b)
                 : cfg.integrator.h;
    plan.sigma_scale =
        cfg.integrator.sigma_scale ? &*cfg.integrator.sigma_scale : nullptr;
    if (plan.scheme == Scheme::ScaledSplitFamily && plan.sigma_scale == nullptr)
      throw ContractError("hmc: ScaledSplitFamily requires sigma_scale");
    if (plan.scheme != Scheme::ScaledSplitFamily && !(plan.h > 0.0))
      throw ContractError("hmc: integrator step size must be > 0");
  }

  ChainOutput out;
  out.seed = rng.seed();
  out.samples.resize(cfg.n_samples, static_cast<Eigen::Index>(d));
  out.delta_h.resize(static_cast<std::size_t>(cfg.n_samples));
  out.accepted.resize(static_cast<std::size_t>(cfg.n_samples));
  out.b_used.resize(static_cast<std::size_t>(cfg.n_samples));
  out.h_used.resize(static_cast<std::size_t>(cfg.n_samples));
  if (cfg.n_samples == 0) return out;

  std::vector<double> q = initial_position(target, cfg.initial, rng);
  out.adaptation.push_back({0, plan.b, plan.h});

  for (std::int64_t i = 0; i < cfg.n_samples; ++i) {
    if (adapt != nullptr && adapt->reset_each_iteration) {
      factor = adapt->b_init - b_floor;
      const double b_new = b_floor + factor;
      if (b_new != plan.b) {
        plan.b = b_new;
        plan.h = theory::energy_null_step(b_new);
        out.adaptation.push_back({i, plan.b, plan.h});
      }
    }
    out.b_used[static_cast<std::size_t>(i)] = plan.scheme == Scheme::StormerVerlet ? 0.0 : plan.b;
    out.h_used[static_cast<std::size_t>(i)] = plan.h;

    const IterationResult res = run_iteration(target, cfg, plan, q, rng);
    out.delta_h[static_cast<std::size_t>(i)] = res.delta_h;
    out.accepted[static_cast<std::size_t>(i)] = res.accepted ? 1 : 0;
    out.total_gradient_evals += res.gradient_evals;
    if (res.eval_failed) ++out.evaluation_failures;
    for (std::size_t c = 0; c < d; ++c)
      out.samples(i, static_cast<Eigen::Index>(c)) = q[c];

    if (adapt != nullptr && !res.accepted) {
      factor *= adapt->reduction;
      plan.b = b_floor + factor;
      plan.h = theory::energy_null_step(plan.b);
      out.adaptation.push_back({i + 1, plan.b, plan.h});
    }
  }
  return out;
}

}  // namespace

std::int64_t choose_steps(double t_star, double h) {
  if (!(t_star > 0.0) || !(h > 0.0))
    throw ContractError("choose_steps: t_star and h must be > 0");
  const double ratio = t_star / h;
  if (ratio >= 9.0e18) return std::numeric_limits<std::int64_t>::max();
  return std::max<std::int64_t>(1, std::llround(ratio));
}

ChainOutput hmc_run(const TargetModel& target, const HmcConfig& cfg, RngState& rng) {
  return run_chain(target, cfg, nullptr, rng);
}

ChainOutput hmc_run_adaptive(const TargetModel& target, const HmcConfig& cfg,
                             const AdaptiveSettings& adapt, RngState& rng) {
  return run_chain(target, cfg, &adapt, rng);
}

}  // namespace splithmc
