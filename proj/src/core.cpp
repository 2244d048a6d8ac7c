#include "splithmc/core.hpp"

#include <cmath>
#include <numbers>

namespace splithmc {

DiagonalMetric::DiagonalMetric(std::vector<double> variances)
    : variances_(std::move(variances)) {
  if (variances_.empty()) throw ContractError("DiagonalMetric: dimension must be >= 1");
  for (std::size_t i = 0; i < variances_.size(); ++i) {
    if (!(variances_[i] > 0.0) || !std::isfinite(variances_[i]))
      throw ContractError("DiagonalMetric: variance " + std::to_string(i) +
                          " must be finite and > 0");
  }
}

DiagonalMetric DiagonalMetric::identity(std::size_t d) {
  return DiagonalMetric(std::vector<double>(d, 1.0));
}

PhasePoint::PhasePoint(std::vector<double> q_in, std::vector<double> p_in)
    : q(std::move(q_in)), p(std::move(p_in)) {
  if (q.empty() || q.size() != p.size())
    throw ContractError("PhasePoint: q and p must have identical length >= 1");
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (!std::isfinite(q[i]) || !std::isfinite(p[i]))
      throw ContractError("PhasePoint: non-finite entry at coordinate " + std::to_string(i));
  }
}

std::uint64_t RngState::next_u64() {
  // splitmix64: output is a mix of seed + counter * golden-ratio increment.
  counter_ += 1;
  std::uint64_t z = seed_ + counter_ * 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double RngState::uniform() {
  // 53-bit mantissa, shifted into the open interval (0, 1).
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngState::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double RngState::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

HamiltonianValue hamiltonian(const TargetModel& target, const PhasePoint& state) {
  if (state.dimension() != target.dimension())
    throw ContractError("hamiltonian: state dimension " + std::to_string(state.dimension()) +
                        " does not match target dimension " +
                        std::to_string(target.dimension()));
  const DiagonalMetric& metric = target.kinetic_metric();
  double kinetic = 0.0;
  for (std::size_t i = 0; i < state.p.size(); ++i)
    kinetic += 0.5 * state.p[i] * state.p[i] / metric.variance(i);
  const double potential = target.potential(state.q);
  if (!std::isfinite(potential))
    throw EvaluationError("hamiltonian: potential is non-finite");
  return HamiltonianValue{potential, kinetic, potential + kinetic};
}

std::vector<double> draw_momentum(const DiagonalMetric& metric, RngState& rng) {
  std::vector<double> p(metric.dimension());
  for (std::size_t i = 0; i < p.size(); ++i)
    p[i] = std::sqrt(metric.variance(i)) * rng.normal();
  return p;
}

}  // namespace splithmc
