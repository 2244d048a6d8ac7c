#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>

#include "splithmc/sampler.hpp"
#include "splithmc/targets.hpp"

namespace splithmc {

struct PosteriorSummary {
  Eigen::VectorXd mean;
  Eigen::VectorXd sd;
};

struct ChainSummary {
  double acceptance_rate = 0.0;
  double mean_delta_h = 0.0;      // over post-burn-in proposals with a defined energy error
  double mean_abs_delta_h = 0.0;
  Eigen::VectorXd ess_per_coordinate;
  double ess_first = 0.0;
  double ess_mean = 0.0;
  double ess_per_work = 0.0;  // ESS of the first coordinate times the mean step size
  PosteriorSummary posterior;
  double mean_h = 0.0;
  std::int64_t evaluation_failures = 0;
};

/// Fraction of accepted proposals among post-burn-in iterations.
double acceptance_rate(const ChainOutput& out, std::int64_t burn_in);

/// Effective sample size via Geyer's initial positive sequence on the
/// autocovariances, clipped to [1, length]. A constant series has ESS 1.
/// Requires length >= 10.
double ess(std::span<const double> series);

/// Per-coordinate mean and standard deviation of the post-burn-in samples.
PosteriorSummary posterior_summary(const ChainOutput& out, std::int64_t burn_in);

ChainSummary summarize(const ChainOutput& out, std::int64_t burn_in);

/// Per-cell posterior mean of the intensity m * exp(y) where y is the latent
/// field recovered from each whitened sample. Rows of `post_samples` are
/// samples; the result is a grid_side x grid_side grid.
Eigen::MatrixXd cox_intensity_map(const Eigen::MatrixXd& post_samples, const CoxTarget& model);

}  // namespace splithmc
