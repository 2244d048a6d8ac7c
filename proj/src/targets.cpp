#include "splithmc/targets.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <fstream>
#include <sstream>

namespace splithmc {

namespace {

Eigen::Map<const Eigen::VectorXd> as_vec(std::span<const double> v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::Map<Eigen::VectorXd> as_vec(std::span<double> v) {
  return Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void check_dim(std::span<const double> q, std::size_t d, const char* who) {
  if (q.size() != d) throw ContractError(std::string(who) + ": state dimension mismatch");
}

std::vector<double> validated_alphas(std::vector<double> alphas) {
  if (alphas.empty()) throw ContractError("GaussianDiagonalTarget: dimension must be >= 1");
  for (double a : alphas)
    if (!(a > 0.0) || !std::isfinite(a))
      throw ContractError("GaussianDiagonalTarget: alphas must be finite and > 0");
  return alphas;
}

// Numerically stable log(1 + exp(z)).
double softplus(double z) {
  if (z > 30.0) return z + std::log1p(std::exp(-z));
  return std::log1p(std::exp(z));
}

double logistic_fn(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double ez = std::exp(z);
  return ez / (1.0 + ez);
}

// Deterministic Poisson draw (Knuth product method); fine for the moderate
// means used by the synthetic data.
std::int64_t poisson_draw(RngState& rng, double mean) {
  if (!(mean >= 0.0) || mean > 600.0)
    throw ContractError("poisson_draw: mean must lie in [0, 600]");
  const double limit = std::exp(-mean);
  double prod = 1.0;
  std::int64_t k = -1;
  do {
    prod *= rng.uniform();
    ++k;
  } while (prod > limit);
  return k;
}

}  // namespace

// ---- GaussianDiagonalTarget ----

GaussianDiagonalTarget::GaussianDiagonalTarget(std::vector<double> alphas, DiagonalMetric kinetic)
    : alphas_(validated_alphas(std::move(alphas))), kinetic_(std::move(kinetic)) {
  if (kinetic_.dimension() != alphas_.size())
    throw ContractError("GaussianDiagonalTarget: kinetic metric dimension mismatch");
}

GaussianDiagonalTarget::GaussianDiagonalTarget(std::vector<double> alphas)
    : alphas_(validated_alphas(std::move(alphas))),
      kinetic_(DiagonalMetric::identity(alphas_.size())) {}

double GaussianDiagonalTarget::potential(std::span<const double> q) const {
  check_dim(q, dimension(), "GaussianDiagonalTarget");
  double u = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j) {
    const double s = q[j] / alphas_[j];
    u += 0.5 * s * s;
  }
  return u;
}

void GaussianDiagonalTarget::gradient(std::span<const double> q, std::span<double> out) const {
  check_dim(q, dimension(), "GaussianDiagonalTarget");
  for (std::size_t j = 0; j < q.size(); ++j) out[j] = q[j] / (alphas_[j] * alphas_[j]);
}

bool GaussianDiagonalTarget::draw_exact(RngState& rng, std::span<double> out) const {
  check_dim(out, dimension(), "GaussianDiagonalTarget::draw_exact");
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = alphas_[j] * rng.normal();
  return true;
}

std::vector<double> GaussianDiagonalTarget::sigma_scale() const {
  std::vector<double> s(alphas_.size());
  for (std::size_t j = 0; j < s.size(); ++j)
    s[j] = std::sqrt(kinetic_.variance(j)) / alphas_[j];
  return s;
}

// ---- GaussianCorrelatedTarget ----

GaussianCorrelatedTarget::GaussianCorrelatedTarget(Eigen::MatrixXd covariance,
                                                   DiagonalMetric kinetic)
    : cov_(std::move(covariance)), kinetic_(std::move(kinetic)) {
  const Eigen::Index d = cov_.rows();
  if (d < 1 || cov_.cols() != d)
    throw ContractError("GaussianCorrelatedTarget: covariance must be square");
  if (!cov_.isApprox(cov_.transpose(), 1e-12))
    throw ContractError("GaussianCorrelatedTarget: covariance must be symmetric");
  if (kinetic_.dimension() != static_cast<std::size_t>(d))
    throw ContractError("GaussianCorrelatedTarget: kinetic metric dimension mismatch");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov_);
  if (solver.info() != Eigen::Success)
    throw ContractError("GaussianCorrelatedTarget: eigendecomposition failed");
  lambda_ = solver.eigenvalues();  // ascending
  if (lambda_.minCoeff() <= 0.0)
    throw ContractError("GaussianCorrelatedTarget: covariance is not positive-definite");
  // Rows of v_ are eigenvectors; fix each row's sign so its largest-magnitude
  // entry is positive (deterministic change of variables across runs).
  v_ = solver.eigenvectors().transpose();
  for (Eigen::Index r = 0; r < v_.rows(); ++r) {
    Eigen::Index imax = 0;
    v_.row(r).cwiseAbs().maxCoeff(&imax);
    if (v_(r, imax) < 0.0) v_.row(r) *= -1.0;
  }
}

double GaussianCorrelatedTarget::potential(std::span<const double> x) const {
  check_dim(x, dimension(), "GaussianCorrelatedTarget");
  const Eigen::VectorXd w = v_ * as_vec(x);
  double u = 0.0;
  for (Eigen::Index j = 0; j < w.size(); ++j) u += 0.5 * w[j] * w[j] / lambda_[j];
  return u;
}

void GaussianCorrelatedTarget::gradient(std::span<const double> x, std::span<double> out) const {
  check_dim(x, dimension(), "GaussianCorrelatedTarget");
  const Eigen::VectorXd w = v_ * as_vec(x);
  as_vec(out) = v_.transpose() * (w.array() / lambda_.array()).matrix();
}

bool GaussianCorrelatedTarget::draw_exact(RngState& rng, std::span<double> out) const {
  check_dim(out, dimension(), "GaussianCorrelatedTarget::draw_exact");
  Eigen::VectorXd z(lambda_.size());
  for (Eigen::Index j = 0; j < z.size(); ++j) z[j] = std::sqrt(lambda_[j]) * rng.normal();
  as_vec(out) = v_.transpose() * z;
  return true;
}

GaussianDiagonalTarget GaussianCorrelatedTarget::decorrelated() const {
  std::vector<double> alphas(static_cast<std::size_t>(lambda_.size()));
  for (Eigen::Index j = 0; j < lambda_.size(); ++j)
    alphas[static_cast<std::size_t>(j)] = std::sqrt(lambda_[j]);
  return GaussianDiagonalTarget(std::move(alphas), kinetic_);
}

// ---- PerturbedGaussianTarget ----

PerturbedGaussianTarget::PerturbedGaussianTarget(std::size_t d, double epsilon, Potential f,
                                                 Gradient grad_f, std::string description)
    : d_(d),
      epsilon_(epsilon),
      f_(std::move(f)),
      grad_f_(std::move(grad_f)),
      description_(std::move(description)),
      kinetic_(DiagonalMetric::identity(d)) {
  if (d_ < 1) throw ContractError("PerturbedGaussianTarget: dimension must be >= 1");
  if (!(epsilon_ > 0.0) || epsilon_ > 1.0)
    throw ContractError("PerturbedGaussianTarget: epsilon must lie in (0, 1]");
  if (!f_ || !grad_f_) throw ContractError("PerturbedGaussianTarget: missing f or gradient");
}

double PerturbedGaussianTarget::potential(std::span<const double> q) const {
  check_dim(q, d_, "PerturbedGaussianTarget");
  double base = 0.0;
  for (double v : q) base += 0.5 * v * v;
  return base + epsilon_ * f_(q);
}

void PerturbedGaussianTarget::gradient(std::span<const double> q, std::span<double> out) const {
  check_dim(q, d_, "PerturbedGaussianTarget");
  grad_f_(q, out);
  for (std::size_t j = 0; j < q.size(); ++j) out[j] = q[j] + epsilon_ * out[j];
}

// ---- CoxTarget ----

CoxTarget::CoxTarget(std::size_t grid_side, std::vector<std::int64_t> counts, double sigma2,
                     double beta_len, std::optional<double> mu)
    : grid_side_(grid_side),
      counts_(std::move(counts)),
      sigma2_(sigma2),
      beta_len_(beta_len),
      mu_(0.0),
      cell_area_(1.0 / (static_cast<double>(grid_side) * static_cast<double>(grid_side))),
      kinetic_(DiagonalMetric::identity(grid_side * grid_side)) {
  const std::size_t n = grid_side_ * grid_side_;
  if (grid_side_ < 2) throw ContractError("CoxTarget: grid side must be >= 2");
  if (counts_.size() != n) throw ContractError("CoxTarget: counts length must be grid^2");
  if (!(sigma2_ > 0.0)) throw ContractError("CoxTarget: sigma2 must be > 0");
  if (!(beta_len_ > 0.0)) throw ContractError("CoxTarget: beta must be > 0");
  std::int64_t total = 0;
  for (std::int64_t c : counts_) {
    if (c < 0) throw ContractError("CoxTarget: counts must be non-negative");
    total += c;
  }
  if (mu) {
    mu_ = *mu;
  } else {
    if (total <= 0)
      throw ContractError("CoxTarget: all-zero counts leave mu undefined (log 0); supply mu");
    mu_ = std::log(static_cast<double>(total)) - 0.5 * sigma2_;
  }

  const double scale = beta_len_ * static_cast<double>(grid_side_);
  cov_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t a = 0; a < n; ++a) {
    const double ia = static_cast<double>(a / grid_side_);
    const double ka = static_cast<double>(a % grid_side_);
    for (std::size_t b = a; b < n; ++b) {
      const double ib = static_cast<double>(b / grid_side_);
      const double kb = static_cast<double>(b % grid_side_);
      const double dist = std::hypot(ia - ib, ka - kb);
      const double v = sigma2_ * std::exp(-dist / scale);
      cov_(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = v;
      cov_(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = v;
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov_);
  if (llt.info() != Eigen::Success)
    throw ContractError("CoxTarget: covariance Cholesky factorization failed");
  g_ = llt.matrixL();

  counts_vec_.resize(static_cast<Eigen::Index>(n));
  for (std::size_t a = 0; a < n; ++a)
    counts_vec_[static_cast<Eigen::Index>(a)] = static_cast<double>(counts_[a]);
}

Eigen::VectorXd CoxTarget::latent_from_state(const Eigen::VectorXd& q) const {
  return (g_.triangularView<Eigen::Lower>() * q).array() + mu_;
}

Eigen::VectorXd CoxTarget::state_from_latent(const Eigen::VectorXd& y) const {
  return g_.triangularView<Eigen::Lower>().solve(
      (y.array() - mu_).matrix().eval());
}

double CoxTarget::potential(std::span<const double> q) const {
  check_dim(q, dimension(), "CoxTarget");
  const Eigen::VectorXd y = latent_from_state(as_vec(q));
  Eigen::Index imax = 0;
  const double ymax = y.maxCoeff(&imax);
  if (ymax > kMaxLatent)
    throw EvaluationError("CoxTarget: latent value " + std::to_string(ymax) +
                              " exceeds exp() range",
                          static_cast<std::ptrdiff_t>(imax));
  const double base = 0.5 * as_vec(q).squaredNorm();
  return base + cell_area_ * y.array().exp().sum() - counts_vec_.dot(y);
}

void CoxTarget::gradient(std::span<const double> q, std::span<double> out) const {
  check_dim(q, dimension(), "CoxTarget");
  const Eigen::VectorXd y = latent_from_state(as_vec(q));
  Eigen::Index imax = 0;
  const double ymax = y.maxCoeff(&imax);
  if (ymax > kMaxLatent)
    throw EvaluationError("CoxTarget: latent value " + std::to_string(ymax) +
                              " exceeds exp() range",
                          static_cast<std::ptrdiff_t>(imax));
  const Eigen::VectorXd inner = cell_area_ * y.array().exp().matrix() - counts_vec_;
  as_vec(out) = as_vec(q) + g_.transpose().triangularView<Eigen::Upper>() * inner;
}

// ---- LogisticTarget ----

LogisticTarget::LogisticTarget(Eigen::MatrixXd design, std::vector<int> labels,
                               double prior_sigma2)
    : design_(std::move(design)),
      labels_(),
      prior_sigma2_(prior_sigma2),
      kinetic_(DiagonalMetric::identity(
          static_cast<std::size_t>(design_.cols() > 0 ? design_.cols() : 1))) {
  const Eigen::Index n = design_.rows();
  const Eigen::Index m = design_.cols();
  if (n < 1 || m < 1) throw ContractError("LogisticTarget: empty design matrix");
  if (static_cast<std::size_t>(n) != labels.size())
    throw ContractError("LogisticTarget: labels length must match instance count");
  if (!(prior_sigma2_ > 0.0)) throw ContractError("LogisticTarget: prior_sigma2 must be > 0");
  if (!design_.allFinite()) throw ContractError("LogisticTarget: design must be finite");
  for (Eigen::Index k = 0; k < n; ++k)
    if (design_(k, 0) != 1.0)
      throw ContractError("LogisticTarget: first design column must be the intercept (all 1)");
  labels_.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    if (labels[static_cast<std::size_t>(k)] != 0 && labels[static_cast<std::size_t>(k)] != 1)
      throw ContractError("LogisticTarget: labels must be 0 or 1");
    labels_[k] = static_cast<double>(labels[static_cast<std::size_t>(k)]);
  }
}

double LogisticTarget::potential(std::span<const double> q) const {
  check_dim(q, dimension(), "LogisticTarget");
  const Eigen::VectorXd z = design_ * as_vec(q);
  double f = -as_vec(q).dot(design_.transpose() * labels_);
  for (Eigen::Index k = 0; k < z.size(); ++k) f += softplus(z[k]);
  return 0.5 * as_vec(q).squaredNorm() + f;
}

void LogisticTarget::gradient(std::span<const double> q, std::span<double> out) const {
  check_dim(q, dimension(), "LogisticTarget");
  const Eigen::VectorXd z = design_ * as_vec(q);
  Eigen::VectorXd s(z.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) s[k] = logistic_fn(z[k]);
  as_vec(out) = as_vec(q) + design_.transpose() * (s - labels_);
}

// ---- factories / loaders ----

GaussianDiagonalTarget neal_multivariate(std::size_t d) {
  if (d < 1) throw ContractError("neal_multivariate: d must be >= 1");
  std::vector<double> alphas(d);
  for (std::size_t j = 0; j < d; ++j) {
    const double jj = static_cast<double>(j + 1);
    alphas[j] = 1.0 / (jj * jj);
  }
  return GaussianDiagonalTarget(std::move(alphas), DiagonalMetric::identity(d));
}

GaussianCorrelatedTarget bivariate_corr(double rho) {
  if (!(std::abs(rho) < 1.0))
    throw ContractError("bivariate_corr: |rho| must be < 1 for positive-definiteness");
  Eigen::MatrixXd s(2, 2);
  s << 1.0, rho, rho, 1.0;
  return GaussianCorrelatedTarget(std::move(s), DiagonalMetric::identity(2));
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, ',')) fields.push_back(cur);
  return fields;
}

[[noreturn]] void parse_fail(const std::string& path, std::size_t line_no,
                             const std::string& what) {
  throw EvaluationError(path + ":" + std::to_string(line_no) + ": " + what);
}

}  // namespace

std::vector<std::int64_t> load_count_grid(const std::string& path, std::size_t& grid_side) {
  std::ifstream in(path);
  if (!in) throw EvaluationError("load_count_grid: cannot open " + path);
  std::vector<std::vector<std::int64_t>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    std::vector<std::int64_t> row;
    for (const auto& f : fields) {
      std::size_t pos = 0;
      long long v = 0;
      try {
        v = std::stoll(f, &pos);
      } catch (const std::exception&) {
        parse_fail(path, line_no, "not an integer: '" + f + "'");
      }
      if (pos != f.size()) parse_fail(path, line_no, "trailing characters in '" + f + "'");
      if (v < 0) parse_fail(path, line_no, "negative count " + std::to_string(v));
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw EvaluationError(path + ": empty count grid");
  grid_side = rows.size();
  std::vector<std::int64_t> counts;
  counts.reserve(grid_side * grid_side);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != grid_side)
      parse_fail(path, i + 1,
                 "expected " + std::to_string(grid_side) + " columns, got " +
                     std::to_string(rows[i].size()));
    counts.insert(counts.end(), rows[i].begin(), rows[i].end());
  }
  return counts;
}

LogisticTarget load_logistic_csv(const std::string& path, const LogisticLoadOptions& opts) {
  std::ifstream in(path);
  if (!in) throw EvaluationError("load_logistic_csv: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  bool skipped_header = !opts.has_header;
  std::size_t n_cols = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (!skipped_header) {
      skipped_header = true;
      continue;
    }
    const auto fields = split_csv_line(line);
    if (fields.size() < 2) parse_fail(path, line_no, "need at least one covariate and a label");
    if (n_cols == 0) n_cols = fields.size();
    if (fields.size() != n_cols)
      parse_fail(path, line_no, "inconsistent column count");
    std::vector<double> row;
    for (std::size_t c = 0; c + 1 < fields.size(); ++c) {
      std::size_t pos = 0;
      double v = 0;
      try {
        v = std::stod(fields[c], &pos);
      } catch (const std::exception&) {
        parse_fail(path, line_no, "not a number: '" + fields[c] + "'");
      }
      if (pos != fields[c].size())
        parse_fail(path, line_no, "trailing characters in '" + fields[c] + "'");
      row.push_back(v);
    }
    const std::string& lab = fields.back();
    if (lab == "0") {
      labels.push_back(0);
    } else if (lab == "1") {
      labels.push_back(1);
    } else {
      parse_fail(path, line_no, "label must be 0 or 1, got '" + lab + "'");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw EvaluationError(path + ": no data rows");

  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index d = static_cast<Eigen::Index>(rows[0].size());
  Eigen::MatrixXd design(n, d + 1);
  design.col(0).setOnes();
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index c = 0; c < d; ++c)
      design(k, c + 1) = rows[static_cast<std::size_t>(k)][static_cast<std::size_t>(c)];

  if (opts.normalize) {
    for (Eigen::Index c = 1; c < design.cols(); ++c) {
      const double mean = design.col(c).mean();
      design.col(c).array() -= mean;
      const double sd = std::sqrt(design.col(c).squaredNorm() / static_cast<double>(n - 1));
      if (sd > 0.0) design.col(c) /= sd;
    }
  }
  if (opts.prior_sigma2 != 1.0) design *= std::sqrt(opts.prior_sigma2);
  return LogisticTarget(std::move(design), std::move(labels), opts.prior_sigma2);
}

CoxTarget synthesize_cox(std::uint64_t seed, std::size_t grid_side, double sigma2,
                         double beta_len, double intensity) {
  if (!(intensity > 0.0)) throw ContractError("synthesize_cox: intensity must be > 0");
  const std::size_t n = grid_side * grid_side;
  // Build an all-zero model just for its covariance factor, then draw counts.
  CoxTarget prior(grid_side, std::vector<std::int64_t>(n, 0), sigma2, beta_len, 0.0);
  RngState rng(seed);
  Eigen::VectorXd z(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  const Eigen::VectorXd field = prior.chol_lower().triangularView<Eigen::Lower>() * z;
  std::vector<std::int64_t> counts(n);
  for (std::size_t i = 0; i < n; ++i) {
    // E[exp(z - sigma2/2)] = 1, so `intensity` is the expected count per cell.
    const double mean = intensity * std::exp(field[static_cast<Eigen::Index>(i)] - 0.5 * sigma2);
    counts[i] = poisson_draw(rng, std::min(mean, 600.0));
  }
  return CoxTarget(grid_side, std::move(counts), sigma2, beta_len);
}

LogisticTarget synthesize_logistic(std::uint64_t seed, std::size_t n_instances,
                                   std::size_t n_covariates) {
  if (n_instances < 10) throw ContractError("synthesize_logistic: need >= 10 instances");
  if (n_covariates < 1) throw ContractError("synthesize_logistic: need >= 1 covariate");
  RngState rng(seed);
  const Eigen::Index n = static_cast<Eigen::Index>(n_instances);
  const Eigen::Index d = static_cast<Eigen::Index>(n_covariates);
  Eigen::MatrixXd design(n, d + 1);
  design.col(0).setOnes();
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index c = 1; c <= d; ++c) design(k, c) = rng.normal();
  Eigen::VectorXd beta(d + 1);
  beta[0] = 0.3;
  for (Eigen::Index c = 1; c <= d; ++c)
    beta[c] = (c % 2 == 1 ? 0.8 : -0.5) / std::sqrt(static_cast<double>(c));
  std::vector<int> labels(n_instances);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double prob = logistic_fn(design.row(k).dot(beta));
    labels[static_cast<std::size_t>(k)] = rng.uniform() < prob ? 1 : 0;
  }
  // Standardize covariates the same way the loader does.
  for (Eigen::Index c = 1; c <= d; ++c) {
    const double mean = design.col(c).mean();
    design.col(c).array() -= mean;
    const double sd = std::sqrt(design.col(c).squaredNorm() / static_cast<double>(n - 1));
    if (sd > 0.0) design.col(c) /= sd;
  }
  return LogisticTarget(std::move(design), std::move(labels));
}

}  // namespace splithmc
