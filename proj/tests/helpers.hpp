#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "splithmc/core.hpp"
#include "splithmc/targets.hpp"

namespace testutil {

using Mat2 = std::array<std::array<double, 2>, 2>;

inline Mat2 mul(const Mat2& a, const Mat2& b) {
  Mat2 r{};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) r[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
  return r;
}

inline std::array<double, 2> apply(const Mat2& m, const std::array<double, 2>& y) {
  return {m[0][0] * y[0] + m[0][1] * y[1], m[1][0] * y[0] + m[1][1] * y[1]};
}

inline Mat2 matpow(Mat2 m, long long n) {
  Mat2 r{{{1.0, 0.0}, {0.0, 1.0}}};
  for (long long i = 0; i < n; ++i) r = mul(m, r);
  return r;
}

// Independent oracle: the splitting-family map on the Gaussian test problem
// assembled by multiplying the five shear stages, with explicit alpha/beta.
inline Mat2 shear_family_matrix(double b, double h, double alpha, double beta) {
  const double ka = 1.0 / (alpha * alpha);
  const double kb = 1.0 / (beta * beta);
  auto kick = [ka](double t) { return Mat2{{{1.0, 0.0}, {-t * ka, 1.0}}}; };
  auto drift = [kb](double t) { return Mat2{{{1.0, t * kb}, {0.0, 1.0}}}; };
  Mat2 m = kick(b * h);
  m = mul(drift(0.5 * h), m);
  m = mul(kick((1.0 - 2.0 * b) * h), m);
  m = mul(drift(0.5 * h), m);
  m = mul(kick(b * h), m);
  return m;
}

inline Mat2 shear_sv_matrix(double h, double alpha, double beta) {
  const double ka = 1.0 / (alpha * alpha);
  const double kb = 1.0 / (beta * beta);
  auto kick = [ka](double t) { return Mat2{{{1.0, 0.0}, {-t * ka, 1.0}}}; };
  auto drift = [kb](double t) { return Mat2{{{1.0, t * kb}, {0.0, 1.0}}}; };
  Mat2 m = kick(0.5 * h);
  m = mul(drift(h), m);
  m = mul(kick(0.5 * h), m);
  return m;
}

// Flat potential with a configurable kinetic metric; free flight under drift.
class ZeroPotentialTarget : public splithmc::TargetModel {
 public:
  explicit ZeroPotentialTarget(splithmc::DiagonalMetric metric) : metric_(std::move(metric)) {}

  std::size_t dimension() const override { return metric_.dimension(); }
  double potential(std::span<const double>) const override { return 0.0; }
  void gradient(std::span<const double> q, std::span<double> out) const override {
    (void)q;
    for (auto& v : out) v = 0.0;
  }
  const splithmc::DiagonalMetric& kinetic_metric() const override { return metric_; }

 private:
  splithmc::DiagonalMetric metric_;
};

// Max relative error between the analytic gradient and central differences.
inline double gradient_fd_error(const splithmc::TargetModel& target,
                                std::vector<double> q, double step = 1e-5) {
  const std::size_t d = target.dimension();
  std::vector<double> grad(d);
  target.gradient(q, grad);
  double worst = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double saved = q[j];
    q[j] = saved + step;
    const double up = target.potential(q);
    q[j] = saved - step;
    const double down = target.potential(q);
    q[j] = saved;
    const double fd = (up - down) / (2.0 * step);
    const double scale = std::max({1.0, std::abs(fd), std::abs(grad[j])});
    worst = std::max(worst, std::abs(fd - grad[j]) / scale);
  }
  return worst;
}

// Determinant of the map's Jacobian, assembled column-by-column with central
// differences. The map acts on the stacked state (q, p).
inline double jacobian_determinant(
    const std::function<std::vector<double>(const std::vector<double>&)>& map,
    const std::vector<double>& state, double step = 5e-5) {
  const std::size_t n = state.size();
  Eigen::MatrixXd jac(n, n);
  std::vector<double> x = state;
  for (std::size_t c = 0; c < n; ++c) {
    const double saved = x[c];
    x[c] = saved + step;
    const std::vector<double> up = map(x);
    x[c] = saved - step;
    const std::vector<double> down = map(x);
    x[c] = saved;
    for (std::size_t r = 0; r < n; ++r)
      jac(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          (up[r] - down[r]) / (2.0 * step);
  }
  return jac.determinant();
}

}  // namespace testutil
