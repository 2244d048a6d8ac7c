#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "splithmc/core.hpp"

namespace splithmc {

/// U(q) = 1/2 sum_j q_j^2 / alpha_j^2 with diagonal kinetic metric.
class GaussianDiagonalTarget : public TargetModel {
 public:
  GaussianDiagonalTarget(std::vector<double> alphas, DiagonalMetric kinetic);
  explicit GaussianDiagonalTarget(std::vector<double> alphas);

  std::size_t dimension() const override { return alphas_.size(); }
  double potential(std::span<const double> q) const override;
  void gradient(std::span<const double> q, std::span<double> out) const override;
  const DiagonalMetric& kinetic_metric() const override { return kinetic_; }
  const std::vector<double>* gaussian_alphas() const override { return &alphas_; }
  bool draw_exact(RngState& rng, std::span<double> out) const override;

  const std::vector<double>& alphas() const { return alphas_; }
  /// sigma_j = beta_j / alpha_j used by the scaled splitting map.
  std::vector<double> sigma_scale() const;

 private:
  std::vector<double> alphas_;
  DiagonalMetric kinetic_;
};

/// Zero-mean Gaussian with dense SPD covariance S, evaluated through the
/// spectral decomposition S = V^T D V (V rows are eigenvectors, eigenvalues
/// ascending, column signs fixed deterministically). HMC runs either in the
/// original coordinates or in the decorrelated ones q = V x.
class GaussianCorrelatedTarget : public TargetModel {
 public:
  GaussianCorrelatedTarget(Eigen::MatrixXd covariance, DiagonalMetric kinetic);

  std::size_t dimension() const override { return static_cast<std::size_t>(cov_.rows()); }
  double potential(std::span<const double> x) const override;
  void gradient(std::span<const double> x, std::span<double> out) const override;
  const DiagonalMetric& kinetic_metric() const override { return kinetic_; }
  bool draw_exact(RngState& rng, std::span<double> out) const override;

  const Eigen::MatrixXd& covariance() const { return cov_; }
  const Eigen::MatrixXd& eigenvectors() const { return v_; }  // rows = eigenvectors
  const Eigen::VectorXd& eigenvalues() const { return lambda_; }

  /// Diagonal form in the decorrelated coordinates (alphas = sqrt eigenvalues).
  GaussianDiagonalTarget decorrelated() const;
  Eigen::VectorXd to_decorrelated(const Eigen::VectorXd& x) const { return v_ * x; }
  Eigen::VectorXd to_original(const Eigen::VectorXd& q) const { return v_.transpose() * q; }

 private:
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd v_;
  Eigen::VectorXd lambda_;
  DiagonalMetric kinetic_;
};

/// U(q) = 1/2 q^T q + epsilon * f(q) with user-supplied perturbation.
class PerturbedGaussianTarget : public TargetModel {
 public:
  using Potential = std::function<double(std::span<const double>)>;
  using Gradient = std::function<void(std::span<const double>, std::span<double>)>;

  PerturbedGaussianTarget(std::size_t d, double epsilon, Potential f, Gradient grad_f,
                          std::string description);

  std::size_t dimension() const override { return d_; }
  double potential(std::span<const double> q) const override;
  void gradient(std::span<const double> q, std::span<double> out) const override;
  const DiagonalMetric& kinetic_metric() const override { return kinetic_; }
  const std::string& description() const { return description_; }
  double epsilon() const { return epsilon_; }

 private:
  std::size_t d_;
  double epsilon_;
  Potential f_;
  Gradient grad_f_;
  std::string description_;
  DiagonalMetric kinetic_;
};

/// Latent Gaussian field over a grid_side x grid_side grid with Poisson cell
/// counts. The covariance S has entries
///   S[(i,k),(i',k')] = sigma2 * exp(-sqrt((i-i')^2 + (k-k')^2) / (beta * d))
/// and the sampler works in whitened coordinates q = L (y - mu 1) with
/// S^{-1} = L^T L. L^{-1} is the lower Cholesky factor G of S (S = G G^T),
/// so all transforms are triangular multiplies or solves with G; S is never
/// inverted explicitly.
class CoxTarget : public TargetModel {
 public:
  CoxTarget(std::size_t grid_side, std::vector<std::int64_t> counts, double sigma2,
            double beta_len, std::optional<double> mu = std::nullopt);

  std::size_t dimension() const override { return counts_.size(); }
  double potential(std::span<const double> q) const override;
  void gradient(std::span<const double> q, std::span<double> out) const override;
  const DiagonalMetric& kinetic_metric() const override { return kinetic_; }

  std::size_t grid_side() const { return grid_side_; }
  double sigma2() const { return sigma2_; }
  double beta_len() const { return beta_len_; }
  double mu() const { return mu_; }
  double cell_area() const { return cell_area_; }
  const std::vector<std::int64_t>& counts() const { return counts_; }
  const Eigen::MatrixXd& covariance() const { return cov_; }
  const Eigen::MatrixXd& chol_lower() const { return g_; }  // G with S = G G^T

  /// y = G q + mu 1 (latent field from whitened state).
  Eigen::VectorXd latent_from_state(const Eigen::VectorXd& q) const;
  /// q = G^{-1} (y - mu 1), by triangular solve.
  Eigen::VectorXd state_from_latent(const Eigen::VectorXd& y) const;

  /// Latent values are capped at this before exp(); beyond it the evaluation
  /// aborts with EvaluationError (the sampler treats that as a rejection).
  static constexpr double kMaxLatent = 700.0;

 private:
  std::size_t grid_side_;
  std::vector<std::int64_t> counts_;
  double sigma2_;
  double beta_len_;
  double mu_;
  double cell_area_;
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd g_;
  Eigen::VectorXd counts_vec_;
  DiagonalMetric kinetic_;
};

/// Bayesian logistic regression with standard normal prior on the
/// coefficients (data pre-scaled so the prior scale is 1):
///   U(q) = 1/2 q^T q + sum_k softplus(x_k^T q) - q^T X^T y.
class LogisticTarget : public TargetModel {
 public:
  /// design: n x (d+1) with an all-ones first column; labels in {0, 1}.
  LogisticTarget(Eigen::MatrixXd design, std::vector<int> labels, double prior_sigma2 = 1.0);

  std::size_t dimension() const override { return static_cast<std::size_t>(design_.cols()); }
  double potential(std::span<const double> q) const override;
  void gradient(std::span<const double> q, std::span<double> out) const override;
  const DiagonalMetric& kinetic_metric() const override { return kinetic_; }

  std::size_t n_instances() const { return static_cast<std::size_t>(design_.rows()); }
  const Eigen::MatrixXd& design() const { return design_; }
  const Eigen::VectorXd& labels() const { return labels_; }
  double prior_sigma2() const { return prior_sigma2_; }

 private:
  Eigen::MatrixXd design_;
  Eigen::VectorXd labels_;
  double prior_sigma2_;
  DiagonalMetric kinetic_;
};

// ---- Factories and loaders ----

/// Diagonal Gaussian with alpha_j = 1/j^2 and identity kinetic metric.
GaussianDiagonalTarget neal_multivariate(std::size_t d);

/// Bivariate unit-variance Gaussian with correlation rho (|rho| < 1).
GaussianCorrelatedTarget bivariate_corr(double rho);

/// Parse a grid_side x grid_side CSV of non-negative integer counts.
std::vector<std::int64_t> load_count_grid(const std::string& path, std::size_t& grid_side);

struct LogisticLoadOptions {
  bool has_header = false;
  bool normalize = true;  // zero mean / unit sd per covariate, intercept untouched
  double prior_sigma2 = 1.0;
};

/// CSV with covariate columns and the binary label in the last column.
LogisticTarget load_logistic_csv(const std::string& path, const LogisticLoadOptions& opts = {});

/// Self-contained Cox data: draws a latent field with the model covariance
/// and Poisson counts with per-cell mean `intensity * exp(z - sigma2/2)`, so
/// `intensity` is the expected count per cell.
CoxTarget synthesize_cox(std::uint64_t seed, std::size_t grid_side, double sigma2,
                         double beta_len, double intensity);

/// Synthetic logistic data with fixed moderate coefficients.
LogisticTarget synthesize_logistic(std::uint64_t seed, std::size_t n_instances,
                                   std::size_t n_covariates);

}  // namespace splithmc
