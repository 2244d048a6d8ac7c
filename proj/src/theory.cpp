#include "splithmc/theory.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace splithmc::theory {

namespace {

void check_positive_finite(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw ContractError(std::string(name) + " must be finite and > 0");
}

// Golden-section minimizer on [lo, hi].
template <typename F>
double golden_minimize(F f, double lo, double hi, double tol) {
  constexpr double inv_phi = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

double mclachlan_objective(double b) {
  const double k31 = (12.0 * b * b - 12.0 * b + 2.0) / 24.0;
  const double k32 = (-6.0 * b + 1.0) / 24.0;
  return k31 * k31 + k32 * k32;
}

}  // namespace

LinearMapCoefficients sv_coefficients(double h_sigma, double sigma) {
  check_positive_finite(h_sigma, "h_sigma");
  check_positive_finite(sigma, "sigma");
  const double h2 = h_sigma * h_sigma;
  const double p = 1.0 - 0.5 * h2;
  const double e = sigma * h2 * h_sigma / (4.0 * (sigma * sigma + 1.0));
  const double q = h_sigma - sigma * e;
  return LinearMapCoefficients{p, q, e, sigma, h_sigma};
}

LinearMapCoefficients family_coefficients(double b, double h_sigma, double sigma) {
  check_positive_finite(h_sigma, "h_sigma");
  check_positive_finite(sigma, "sigma");
  if (b == 0.0 || b == 0.5)
    throw ContractError(
        "family_coefficients: b in {0, 1/2} degenerates to Stormer-Verlet; "
        "use sv_coefficients");
  const double s2 = sigma * sigma;
  const double h2 = h_sigma * h_sigma;
  const double h3 = h2 * h_sigma;
  const double h5 = h3 * h2;
  const double denom = 4.0 * (s2 + 1.0);
  const double p = 1.0 - 0.5 * h2 + 0.25 * h2 * h2 * b * (1.0 - 2.0 * b);
  const double e = sigma * h3 / denom * energy_residual(b, h_sigma);
  const double q = h_sigma + (4.0 * b * b * s2 - 4.0 * b * s2 + 2.0 * b - 1.0) / denom * h3 +
                   s2 * b * b * (1.0 - 2.0 * b) / denom * h5;
  return LinearMapCoefficients{p, q, e, sigma, h_sigma};
}

double energy_residual(double b, double h_sigma) noexcept {
  const double h2 = h_sigma * h_sigma;
  return 2.0 * h2 * b * b * b - (4.0 + h2) * b * b + 6.0 * b - 1.0;
}

double energy_null_step(double b) {
  if (!(b > kFamilyBLower) || !(b <= kFamilyBUpper))
    throw std::domain_error("energy_null_step: b must lie in ((3-sqrt(5))/4, 1/4] = (" +
                            std::to_string(kFamilyBLower) + ", " +
                            std::to_string(kFamilyBUpper) + "]");
  const double num = 4.0 * b * b - 6.0 * b + 1.0;
  const double den = b * b * (2.0 * b - 1.0);
  return std::sqrt(num / den);
}

double stability_limit(double b) {
  if (!(b > 0.0) || !(b < 0.5))
    throw std::domain_error("stability_limit: b must lie in (0, 1/2)");
  return std::min(std::sqrt(2.0 / b), std::sqrt(2.0 / (0.5 - b)));
}

std::array<std::array<double, 2>, 2> one_step_matrix(const LinearMapCoefficients& c) {
  return {{{c.p, c.e + c.q / c.sigma}, {c.e - c.sigma * c.q, c.p}}};
}

double det_identity_residual(const LinearMapCoefficients& c) {
  return c.p * c.p - (c.e + c.q / c.sigma) * (c.e - c.sigma * c.q) - 1.0;
}

const std::vector<FamilyPreset>& family_presets() {
  static const std::vector<FamilyPreset> presets = [] {
    std::vector<FamilyPreset> out;
    const double b_max = kFamilyBUpper;
    const double b_bcs = (3.0 - std::sqrt(3.0)) / 6.0;
    // Stability-margin tuning; tabulated 4-digit value.
    const double b_stab = 0.2008;
    const double b_ml =
        golden_minimize(mclachlan_objective, kFamilyBLower + 1e-12, kFamilyBUpper, 1e-10);
    out.push_back({PresetName::MaxStep, "b_max", b_max, energy_null_step(b_max)});
    out.push_back({PresetName::Bcs, "b_bcs", b_bcs, energy_null_step(b_bcs)});
    out.push_back({PresetName::Stability, "b_stab", b_stab, energy_null_step(b_stab)});
    out.push_back({PresetName::McLachlan, "b_ml", b_ml, energy_null_step(b_ml)});
    return out;
  }();
  return presets;
}

std::array<std::array<double, 2>, 2> energy_error_matrix(const LinearMapCoefficients& c,
                                                         double alpha, double beta) {
  check_positive_finite(alpha, "alpha");
  check_positive_finite(beta, "beta");
  if (std::abs(beta / alpha - c.sigma) > 1e-9 * std::max(1.0, c.sigma))
    throw ContractError("energy_error_matrix: coefficients computed for sigma = " +
                        std::to_string(c.sigma) + " but beta/alpha = " +
                        std::to_string(beta / alpha));
  const double a2 = alpha * alpha;
  const double b2 = beta * beta;
  const double off = (1.0 / a2 + 1.0 / b2) * c.e * c.p;
  const double d1 = (c.p * c.p - 1.0) / a2 + (c.e / beta - c.q / alpha) * (c.e / beta - c.q / alpha);
  const double d2 = (c.p * c.p - 1.0) / b2 + (c.e / alpha + c.q / beta) * (c.e / alpha + c.q / beta);
  return {{{d1, off}, {off, d2}}};
}

ExpectationAnalysis expected_energy_error(const LinearMapCoefficients& c,
                                          std::int64_t n_steps) {
  if (n_steps < 1) throw ContractError("expected_energy_error: n_steps must be >= 1");
  const double sum_sigma = c.sigma + 1.0 / c.sigma;
  const double expected = 0.5 * static_cast<double>(n_steps) * sum_sigma * sum_sigma * c.e * c.e;
  ExpectationAnalysis out{n_steps, expected, std::nullopt, std::nullopt, std::nullopt};
  if (std::abs(c.p) < 1.0) {
    const double angle = std::acos(c.p);
    const double sin_angle = std::sqrt((1.0 - c.p) * (1.0 + c.p));
    const double chi = (c.sigma * c.q - c.e) / sin_angle;
    const double chi_tilde = c.sigma / chi;
    const double rho = 0.5 * (chi_tilde - 1.0 / chi_tilde) * (chi_tilde - 1.0 / chi_tilde);
    if (std::isfinite(chi) && std::isfinite(rho)) {
      const double trig_form = static_cast<double>(n_steps) * sin_angle * sin_angle * rho;
      if (std::abs(trig_form - expected) > 1e-10 * std::max(1.0, std::abs(expected)))
        throw std::logic_error("expected_energy_error: trigonometric form disagrees "
                               "with the closed form beyond 1e-10");
      out.angle = angle;
      out.chi = chi;
      out.rho = rho;
    }
  }
  return out;
}

double multivariate_energy_residual(double b, std::span<const double> alphas,
                                    std::span<const double> betas) {
  if (alphas.empty() || alphas.size() != betas.size())
    throw ContractError("multivariate_energy_residual: alphas/betas must have equal length >= 1");
  const double h = energy_null_step(b);  // validates b
  double worst = 0.0;
  for (std::size_t j = 0; j < alphas.size(); ++j) {
    check_positive_finite(alphas[j], "alpha");
    check_positive_finite(betas[j], "beta");
    const double sigma_j = betas[j] / alphas[j];
    const LinearMapCoefficients c = family_coefficients(b, h, sigma_j);
    // Energy-error matrix of the scaled map in normalized coordinates
    // Y_hat = D^{-1/2} Y; per-oscillator block entries:
    const double diag_q = c.p * c.p + (c.q - c.e / sigma_j) * (c.q - c.e / sigma_j) - 1.0;
    const double diag_p = c.p * c.p + (c.q + sigma_j * c.e) * (c.q + sigma_j * c.e) - 1.0;
    const double off = c.p * (sigma_j + 1.0 / sigma_j) * c.e;
    worst = std::max({worst, std::abs(diag_q), std::abs(diag_p), std::abs(off)});
  }
  return worst;
}

}  // namespace splithmc::theory
