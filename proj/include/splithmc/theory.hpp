#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "splithmc/core.hpp"

// Closed-form analysis of the one-step linear map produced by symplectic,
// momentum-flip reversible integrators on the Gaussian test problem
//   dq/dt = p / beta^2,   dp/dt = -q / alpha^2.
// Every such map is
//   M = [ p      e + q/sigma ]
//       [ e - sigma*q   p    ],   sigma = beta/alpha,
// and symplecticity forces p^2 - (e + q/sigma)(e - sigma*q) = 1. The `e`
// coefficient alone controls the energy error: e = 0 makes the map exactly
// energy preserving, and the expected energy error of an N-step trajectory
// started from the stationary Gaussian is (N/2)(sigma + 1/sigma)^2 e^2.

namespace splithmc::theory {

/// Admissible interval for the splitting-family parameter b when an exact
/// energy-nullifying step exists: (3 - sqrt(5))/4 < b <= 1/4. The lower
/// endpoint is excluded (the step size degenerates to zero there).
inline constexpr double kFamilyBLower = 0.19098300562505257590;  // (3 - sqrt(5))/4
inline constexpr double kFamilyBUpper = 0.25;

/// One-step map coefficients on the Gaussian test problem, in the scaled
/// step h_sigma = h / (alpha * beta).
struct LinearMapCoefficients {
  double p;        // common diagonal entry of the map
  double q;        // rotational off-diagonal component
  double e;        // energy-defect component; zero iff energy preserving
  double sigma;    // beta / alpha
  double h_sigma;  // h / (alpha * beta)
};

/// Velocity Stormer-Verlet coefficients.
LinearMapCoefficients sv_coefficients(double h_sigma, double sigma);

/// Coefficients for the five-stage splitting family with parameter b.
/// b in {0, 1/2} degenerates to Stormer-Verlet and is rejected.
LinearMapCoefficients family_coefficients(double b, double h_sigma, double sigma);

/// Cubic residual R(b, h) = 2 h^2 b^3 - (4 + h^2) b^2 + 6 b - 1. The family's
/// energy defect is e = sigma h^3 / (4 (sigma^2 + 1)) * R(b, h), so roots of
/// R in either variable give energy-preserving schemes.
double energy_residual(double b, double h_sigma) noexcept;

/// The step size h_b = sqrt((4b^2 - 6b + 1) / (b^2 (2b - 1))) at which the
/// family preserves the Gaussian energy exactly. Requires b inside
/// (kFamilyBLower, kFamilyBUpper]; throws std::domain_error otherwise.
double energy_null_step(double b);

/// Upper end of the stability interval: min(sqrt(2/b), sqrt(2/(1/2 - b))).
double stability_limit(double b);

/// The 2x2 map assembled from the coefficients (row-major).
std::array<std::array<double, 2>, 2> one_step_matrix(const LinearMapCoefficients& c);

/// p^2 - (e + q/sigma)(e - sigma q) - 1; zero for symplectic maps.
double det_identity_residual(const LinearMapCoefficients& c);

enum class PresetName { MaxStep, Bcs, Stability, McLachlan };

struct FamilyPreset {
  PresetName name;
  std::string label;  // "b_max", "b_bcs", "b_stab", "b_ml"
  double b;
  double step;  // energy_null_step(b)
};

/// The four catalogued parameter choices: the largest admissible b, the
/// Blanes-Casas-Sanz-Serna optimum (3 - sqrt(3))/6, the stability-margin
/// tuning, and the McLachlan leading-error minimizer (found numerically).
const std::vector<FamilyPreset>& family_presets();

/// Energy-error matrix E of the one-step map: the per-step energy change is
/// Delta = 1/2 Y^T E Y. All entries vanish when e = 0.
std::array<std::array<double, 2>, 2> energy_error_matrix(const LinearMapCoefficients& c,
                                                         double alpha, double beta);

struct ExpectationAnalysis {
  std::int64_t n_steps;
  double expected_delta;        // (N/2)(sigma + 1/sigma)^2 e^2
  std::optional<double> angle;  // arccos(p), present only when |p| < 1
  std::optional<double> chi;    // scaling of the similarity to a rotation
  std::optional<double> rho;    // 1/2 (sigma/chi - chi/sigma)^2
};

/// Expected energy error of an N-step trajectory from Gaussian initial
/// states. In the stable regime |p| < 1 the trigonometric form
/// N sin^2(angle) rho is populated and cross-checked against the closed form.
ExpectationAnalysis expected_energy_error(const LinearMapCoefficients& c,
                                          std::int64_t n_steps);

/// Max-abs entry of the normalized 2d-dimensional energy-error matrix of the
/// scaled splitting map run at the energy-null step, over oscillators with
/// standard deviations alphas (positions) and betas (momenta). Exact energy
/// preservation means this stays at rounding level.
double multivariate_energy_residual(double b, std::span<const double> alphas,
                                    std::span<const double> betas);

}  // namespace splithmc::theory
