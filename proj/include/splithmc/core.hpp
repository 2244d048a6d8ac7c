#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace splithmc {

/// Violated precondition or type invariant (caller bug).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical evaluation failed (overflow, non-finite value). Carries the
/// offending coordinate index when one is known, -1 otherwise. HMC drivers
/// treat this as a rejected proposal.
class EvaluationError : public std::runtime_error {
 public:
  explicit EvaluationError(const std::string& msg, std::ptrdiff_t index = -1)
      : std::runtime_error(msg), index_(index) {}
  std::ptrdiff_t index() const noexcept { return index_; }

 private:
  std::ptrdiff_t index_;
};

/// Diagonal covariance. Entries are variances and must be strictly positive.
/// Used both for the kinetic metric and for diagonal Gaussian potentials.
class DiagonalMetric {
 public:
  explicit DiagonalMetric(std::vector<double> variances);
  static DiagonalMetric identity(std::size_t d);

  std::size_t dimension() const noexcept { return variances_.size(); }
  const std::vector<double>& variances() const noexcept { return variances_; }
  double variance(std::size_t i) const { return variances_[i]; }

 private:
  std::vector<double> variances_;
};

/// Joint position/momentum state. Both vectors have the same length and all
/// entries are finite; the constructor enforces this.
struct PhasePoint {
  std::vector<double> q;
  std::vector<double> p;

  PhasePoint(std::vector<double> q_in, std::vector<double> p_in);
  std::size_t dimension() const noexcept { return q.size(); }
};

struct HamiltonianValue {
  double potential;
  double kinetic;
  double total;  // potential + kinetic, exactly as computed
};

/// Deterministic counter-based generator (splitmix64). State is the seed plus
/// a stream counter, so identical seed + call sequence replays bit-for-bit.
/// Gaussian draws use the Box-Muller transform with a fixed two-uniform cost
/// per draw; no rejection loops, so replay counts are stable.
class RngState {
 public:
  explicit RngState(std::uint64_t seed) : seed_(seed), counter_(0) {}

  std::uint64_t next_u64();
  /// Uniform draw in the open interval (0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Standard normal draw; consumes exactly two uniforms.
  double normal();

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

/// Contract for a sampling target: dimension, potential U(q), its gradient,
/// and the kinetic metric. Models are immutable after construction and safe
/// to share across threads; RngState is single-owner.
class TargetModel {
 public:
  virtual ~TargetModel() = default;

  virtual std::size_t dimension() const = 0;
  virtual double potential(std::span<const double> q) const = 0;
  virtual void gradient(std::span<const double> q, std::span<double> out) const = 0;
  virtual const DiagonalMetric& kinetic_metric() const = 0;

  /// Standard deviations of a diagonal Gaussian potential, when the target
  /// is one; null otherwise. Enables the scaled splitting map.
  virtual const std::vector<double>* gaussian_alphas() const { return nullptr; }

  /// Draw exactly from the target when a closed form exists. Returns false
  /// when unsupported (out is untouched in that case).
  virtual bool draw_exact(RngState& rng, std::span<double> out) const {
    (void)rng;
    (void)out;
    return false;
  }
};

/// H(q, p) = U(q) + 1/2 sum_i p_i^2 / beta_i^2. Pure: identical inputs give
/// bit-identical results. Throws ContractError on dimension mismatch and
/// EvaluationError if the potential is non-finite.
HamiltonianValue hamiltonian(const TargetModel& target, const PhasePoint& state);

/// Momentum draw from N(0, metric); entry i has variance metric.variance(i).
std::vector<double> draw_momentum(const DiagonalMetric& metric, RngState& rng);

}  // namespace splithmc
