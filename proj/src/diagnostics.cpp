#include "splithmc/diagnostics.hpp"

#include <algorithm>
#include <cmath>

namespace splithmc {

namespace {

void check_burn(const ChainOutput& out, std::int64_t burn_in) {
  const auto n = static_cast<std::int64_t>(out.samples.rows());
  if (burn_in < 0 || burn_in >= n)
    throw ContractError("diagnostics: burn_in must satisfy 0 <= burn_in < chain length");
}

}  // namespace

double acceptance_rate(const ChainOutput& out, std::int64_t burn_in) {
  check_burn(out, burn_in);
  std::int64_t kept = 0;
  const auto n = static_cast<std::int64_t>(out.accepted.size());
  for (std::int64_t i = burn_in; i < n; ++i) kept += out.accepted[static_cast<std::size_t>(i)];
  return static_cast<double>(kept) / static_cast<double>(n - burn_in);
}

double ess(std::span<const double> series) {
  const std::size_t n = series.size();
  if (n < 10) throw ContractError("ess: series must have length >= 10");
  const double nd = static_cast<double>(n);

  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= nd;

  auto autocov = [&](std::size_t lag) {
    if (lag >= n) return 0.0;
    double acc = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t)
      acc += (series[t] - mean) * (series[t + lag] - mean);
    return acc / nd;
  };

  const double gamma0 = autocov(0);
  if (!(gamma0 > 0.0)) return 1.0;  // constant series: fully correlated

  // Initial positive sequence: sum paired autocovariances while positive.
  double paired_sum = 0.0;
  for (std::size_t m = 0; 2 * m < n; ++m) {
    const double pair = autocov(2 * m) + autocov(2 * m + 1);
    if (pair <= 0.0) break;
    paired_sum += pair;
  }
  const double tau = std::max(2.0 * paired_sum / gamma0 - 1.0, 1e-12);
  return std::clamp(nd / tau, 1.0, nd);
}

PosteriorSummary posterior_summary(const ChainOutput& out, std::int64_t burn_in) {
  check_burn(out, burn_in);
  const auto n = static_cast<std::int64_t>(out.samples.rows());
  const std::int64_t kept = n - burn_in;
  if (kept < 2) throw ContractError("posterior_summary: need >= 2 post-burn-in samples");
  const auto block = out.samples.bottomRows(kept);
  PosteriorSummary s;
  s.mean = block.colwise().mean();
  s.sd.resize(block.cols());
  for (Eigen::Index c = 0; c < block.cols(); ++c) {
    const double var =
        (block.col(c).array() - s.mean[c]).square().sum() / static_cast<double>(kept - 1);
    s.sd[c] = std::sqrt(var);
  }
  return s;
}

ChainSummary summarize(const ChainOutput& out, std::int64_t burn_in) {
  check_burn(out, burn_in);
  ChainSummary s;
  s.acceptance_rate = acceptance_rate(out, burn_in);
  s.posterior = posterior_summary(out, burn_in);
  s.evaluation_failures = out.evaluation_failures;

  const auto n = static_cast<std::int64_t>(out.samples.rows());
  const std::int64_t kept = n - burn_in;

  double dh = 0.0, adh = 0.0, hsum = 0.0;
  std::int64_t n_dh = 0;
  for (std::int64_t i = burn_in; i < n; ++i) {
    const double v = out.delta_h[static_cast<std::size_t>(i)];
    if (std::isfinite(v)) {
      dh += v;
      adh += std::abs(v);
      ++n_dh;
    }
    hsum += out.h_used[static_cast<std::size_t>(i)];
  }
  s.mean_delta_h = n_dh > 0 ? dh / static_cast<double>(n_dh) : 0.0;
  s.mean_abs_delta_h = n_dh > 0 ? adh / static_cast<double>(n_dh) : 0.0;
  s.mean_h = hsum / static_cast<double>(kept);

  const Eigen::Index d = out.samples.cols();
  s.ess_per_coordinate.resize(d);
  std::vector<double> column(static_cast<std::size_t>(kept));
  for (Eigen::Index c = 0; c < d; ++c) {
    for (std::int64_t i = 0; i < kept; ++i)
      column[static_cast<std::size_t>(i)] = out.samples(burn_in + i, c);
    s.ess_per_coordinate[c] = ess(column);
  }
  s.ess_first = s.ess_per_coordinate[0];
  s.ess_mean = s.ess_per_coordinate.mean();
  s.ess_per_work = s.ess_first * s.mean_h;
  return s;
}

Eigen::MatrixXd cox_intensity_map(const Eigen::MatrixXd& post_samples, const CoxTarget& model) {
  const auto d = static_cast<Eigen::Index>(model.grid_side());
  if (post_samples.rows() < 1 ||
      post_samples.cols() != static_cast<Eigen::Index>(model.dimension()))
    throw ContractError("cox_intensity_map: sample matrix shape mismatch");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(post_samples.cols());
  for (Eigen::Index r = 0; r < post_samples.rows(); ++r) {
    const Eigen::VectorXd y = model.latent_from_state(post_samples.row(r).transpose());
    acc += (y.array().min(CoxTarget::kMaxLatent).exp() * model.cell_area()).matrix();
  }
  acc /= static_cast<double>(post_samples.rows());
  Eigen::MatrixXd grid(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index k = 0; k < d; ++k) grid(i, k) = acc[i * d + k];
  return grid;
}

}  // namespace splithmc
