#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <variant>
#include <vector>

#include "splithmc/core.hpp"
#include "splithmc/integrators.hpp"

namespace splithmc {

/// How the chain's first position is chosen.
struct InitZero {};
struct InitTargetDraw {};  // exact draw when the target supports one, else zero
using InitialPosition = std::variant<InitZero, InitTargetDraw, std::vector<double>>;

struct HmcConfig {
  std::int64_t n_samples = 0;
  std::int64_t burn_in = 0;
  double path_length = 1.0;   // T*
  double path_jitter = 0.0;   // T* drawn uniformly in base * (1 +- jitter)
  IntegratorSpec integrator;  // ignored by the adaptive driver
  std::uint64_t seed = 0;
  InitialPosition initial = InitTargetDraw{};
  // Safety cap on steps per trajectory (the adaptive step size can collapse).
  std::int64_t max_trajectory_steps = 1'000'000;
};

/// Adaptive-b driver state. b = b_floor + factor stays in the admissible
/// interval; factor shrinks geometrically (factor *= reduction) on every
/// rejection and the step size tracks the energy-null step of the current b.
/// With reset_each_iteration the factor is restored to b_init - b_floor at
/// the top of every iteration.
struct AdaptiveSettings {
  double b_init = 0.25;
  double reduction = 0.75;
  bool reset_each_iteration = false;
};

struct AdaptationRecord {
  std::int64_t iteration;  // completed iterations when the value took effect
  double b;
  double h;
};

struct ChainOutput {
  Eigen::MatrixXd samples;  // n_samples x d; row i is the state after iteration i
  std::vector<double> delta_h;           // proposal energy error; NaN if evaluation failed
  std::vector<std::uint8_t> accepted;
  std::vector<double> b_used;
  std::vector<double> h_used;
  std::vector<AdaptationRecord> adaptation;
  std::uint64_t seed = 0;
  std::int64_t evaluation_failures = 0;
  std::int64_t total_gradient_evals = 0;
};

/// N = max(1, round(t_star / h)); the realized path length is N * h.
std::int64_t choose_steps(double t_star, double h);

/// Practical HMC: fresh momentum each iteration, trajectory by the configured
/// integrator, Metropolis rule alpha = min(1, exp(-delta_H)) with strict
/// accept when alpha > u. Evaluation errors count as rejections.
ChainOutput hmc_run(const TargetModel& target, const HmcConfig& cfg, RngState& rng);

/// Adaptive-b HMC over the splitting family at the energy-null step.
/// Requires cfg.path_length >= 3.
ChainOutput hmc_run_adaptive(const TargetModel& target, const HmcConfig& cfg,
                             const AdaptiveSettings& adapt, RngState& rng);

}  // namespace splithmc
