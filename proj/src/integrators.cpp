#include "splithmc/integrators.hpp"

#include <cmath>
#include <string>

#include "splithmc/theory.hpp"

namespace splithmc {

namespace {

void check_finite(std::span<const double> v, const char* what) {
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i]))
      throw EvaluationError(std::string(what) + " non-finite at coordinate " +
                              std::to_string(i),
                            static_cast<std::ptrdiff_t>(i));
}

// p -= t * grad U(q)
void kick(const TargetModel& target, std::vector<double>& q, std::vector<double>& p,
          double t, std::vector<double>& grad, std::int64_t& evals) {
  target.gradient(q, grad);
  ++evals;
  check_finite(grad, "gradient");
  for (std::size_t i = 0; i < p.size(); ++i) p[i] -= t * grad[i];
}

// q += t * D_beta^{-1} p
void drift(const DiagonalMetric& metric, std::vector<double>& q,
           const std::vector<double>& p, double t) {
  for (std::size_t i = 0; i < q.size(); ++i) q[i] += t * p[i] / metric.variance(i);
}

void sv_step_raw(const TargetModel& target, std::vector<double>& q, std::vector<double>& p,
                 double h, std::vector<double>& grad, std::int64_t& evals) {
  const DiagonalMetric& metric = target.kinetic_metric();
  kick(target, q, p, 0.5 * h, grad, evals);
  drift(metric, q, p, h);
  kick(target, q, p, 0.5 * h, grad, evals);
}

void family_step_raw(const TargetModel& target, std::vector<double>& q,
                     std::vector<double>& p, double b, double h, std::vector<double>& grad,
                     std::int64_t& evals) {
  const DiagonalMetric& metric = target.kinetic_metric();
  kick(target, q, p, b * h, grad, evals);
  drift(metric, q, p, 0.5 * h);
  kick(target, q, p, (1.0 - 2.0 * b) * h, grad, evals);
  drift(metric, q, p, 0.5 * h);
  kick(target, q, p, b * h, grad, evals);
}

void scaled_step_raw(std::vector<double>& q, std::vector<double>& p, double b, double h,
                     std::span<const double> sigma) {
  const double outer = b * h;
  const double inner = (1.0 - 2.0 * b) * h;
  const double half = 0.5 * h;
  for (std::size_t i = 0; i < q.size(); ++i) p[i] -= outer * sigma[i] * q[i];
  for (std::size_t i = 0; i < q.size(); ++i) q[i] += half * p[i] / sigma[i];
  for (std::size_t i = 0; i < q.size(); ++i) p[i] -= inner * sigma[i] * q[i];
  for (std::size_t i = 0; i < q.size(); ++i) q[i] += half * p[i] / sigma[i];
  for (std::size_t i = 0; i < q.size(); ++i) p[i] -= outer * sigma[i] * q[i];
}

void check_state_dims(const TargetModel& target, const PhasePoint& state) {
  if (state.dimension() != target.dimension())
    throw ContractError("integrator: state dimension does not match target");
}

void check_scaled_preconditions(const TargetModel& target, double b,
                                std::span<const double> sigma_scale) {
  if (target.gaussian_alphas() == nullptr)
    throw ContractError(
        "scaled_split_family_step: target has no diagonal Gaussian structure");
  theory::energy_null_step(b);  // validates b
  if (sigma_scale.size() != target.dimension())
    throw ContractError("scaled_split_family_step: sigma_scale length mismatch");
  for (std::size_t i = 0; i < sigma_scale.size(); ++i)
    if (!(sigma_scale[i] > 0.0) || !std::isfinite(sigma_scale[i]))
      throw ContractError("scaled_split_family_step: sigma_scale entries must be > 0");
}

}  // namespace

PhasePoint stormer_verlet_step(const TargetModel& target, const PhasePoint& state, double h) {
  if (!(h > 0.0)) throw ContractError("stormer_verlet_step: h must be > 0");
  check_state_dims(target, state);
  std::vector<double> q = state.q, p = state.p, grad(q.size());
  std::int64_t evals = 0;
  sv_step_raw(target, q, p, h, grad, evals);
  check_finite(q, "position");
  check_finite(p, "momentum");
  return PhasePoint(std::move(q), std::move(p));
}

PhasePoint split_family_step(const TargetModel& target, const PhasePoint& state, double b,
                             double h) {
  if (!(h > 0.0)) throw ContractError("split_family_step: h must be > 0");
  if (b == 0.0 || b == 0.5)
    throw ContractError("split_family_step: b in {0, 1/2} degenerates to Stormer-Verlet");
  check_state_dims(target, state);
  std::vector<double> q = state.q, p = state.p, grad(q.size());
  std::int64_t evals = 0;
  family_step_raw(target, q, p, b, h, grad, evals);
  check_finite(q, "position");
  check_finite(p, "momentum");
  return PhasePoint(std::move(q), std::move(p));
}

PhasePoint scaled_split_family_step(const TargetModel& target, const PhasePoint& state,
                                    double b, std::span<const double> sigma_scale) {
  check_state_dims(target, state);
  check_scaled_preconditions(target, b, sigma_scale);
  const double h = theory::energy_null_step(b);
  std::vector<double> q = state.q, p = state.p;
  scaled_step_raw(q, p, b, h, sigma_scale);
  check_finite(q, "position");
  check_finite(p, "momentum");
  return PhasePoint(std::move(q), std::move(p));
}

TrajectoryResult integrate(const TargetModel& target, const IntegratorSpec& spec,
                           const PhasePoint& start) {
  check_state_dims(target, start);
  if (spec.n_steps < 1) throw ContractError("integrate: n_steps must be >= 1");

  double h = spec.h;
  std::span<const double> sigma;
  switch (spec.scheme) {
    case Scheme::StormerVerlet:
      if (!(h > 0.0)) throw ContractError("integrate: h must be > 0");
      break;
    case Scheme::SplitFamily:
      if (!(h > 0.0)) throw ContractError("integrate: h must be > 0");
      if (spec.b == 0.0 || spec.b == 0.5)
        throw ContractError("integrate: b in {0, 1/2} degenerates to Stormer-Verlet");
      break;
    case Scheme::ScaledSplitFamily:
      if (!spec.sigma_scale)
        throw ContractError("integrate: ScaledSplitFamily requires sigma_scale");
      check_scaled_preconditions(target, spec.b, *spec.sigma_scale);
      h = theory::energy_null_step(spec.b);
      sigma = *spec.sigma_scale;
      break;
  }

  const HamiltonianValue h0 = hamiltonian(target, start);
  std::vector<double> q = start.q, p = start.p, grad(q.size());
  std::int64_t evals = 0;
  for (std::int64_t n = 0; n < spec.n_steps; ++n) {
    switch (spec.scheme) {
      case Scheme::StormerVerlet:
        sv_step_raw(target, q, p, h, grad, evals);
        break;
      case Scheme::SplitFamily:
        family_step_raw(target, q, p, spec.b, h, grad, evals);
        break;
      case Scheme::ScaledSplitFamily:
        scaled_step_raw(q, p, spec.b, h, sigma);
        break;
    }
    check_finite(q, "position");
    check_finite(p, "momentum");
  }
  PhasePoint end(std::move(q), std::move(p));
  const HamiltonianValue h1 = hamiltonian(target, end);
  return TrajectoryResult{std::move(end), h1.total - h0.total, evals};
}

}  // namespace splithmc
