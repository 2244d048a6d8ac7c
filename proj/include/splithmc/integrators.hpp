#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "splithmc/core.hpp"

// Phase-space maps used inside HMC. All three are symplectic and momentum
// flip-reversible compositions of exact sub-flows:
//   Stormer-Verlet      kick(h/2) drift(h) kick(h/2)
//   splitting family    kick(bh) drift(h/2) kick((1-2b)h) drift(h/2) kick(bh)
//   scaled family       same composition on the per-coordinate scaled flows
//                       q_j += t p_j / s_j, p_j -= t s_j q_j, at the
//                       energy-null step; defined only for diagonal Gaussian
//                       targets, where it preserves H exactly.
// Adjacent kicks of consecutive steps are never fused: step boundaries stay
// exact, and the gradient count is 2 per step for Stormer-Verlet and 3 per
// step for the family.

namespace splithmc {

enum class Scheme { StormerVerlet, SplitFamily, ScaledSplitFamily };

struct IntegratorSpec {
  Scheme scheme = Scheme::StormerVerlet;
  double b = 0.0;    // family parameter; ignored for StormerVerlet
  double h = 0.0;    // step size; ignored for ScaledSplitFamily (it owns h_b)
  std::int64_t n_steps = 1;
  // Diagonal scale s_j = beta_j / alpha_j; required iff ScaledSplitFamily.
  std::optional<std::vector<double>> sigma_scale;
};

struct TrajectoryResult {
  PhasePoint end_state;
  double delta_h;  // H(end) - H(start)
  std::int64_t n_gradient_evals;
};

PhasePoint stormer_verlet_step(const TargetModel& target, const PhasePoint& state, double h);

PhasePoint split_family_step(const TargetModel& target, const PhasePoint& state, double b,
                             double h);

/// One step of the scaled composition at the internally fixed energy-null
/// step for b. The target must expose a diagonal Gaussian structure.
PhasePoint scaled_split_family_step(const TargetModel& target, const PhasePoint& state,
                                    double b, std::span<const double> sigma_scale);

/// Applies the selected one-step map n_steps times. The start state is not
/// mutated; evaluation failures propagate and no partial trajectory is
/// returned.
TrajectoryResult integrate(const TargetModel& target, const IntegratorSpec& spec,
                           const PhasePoint& start);

}  // namespace splithmc
