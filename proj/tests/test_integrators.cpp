#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "splithmc/integrators.hpp"
#include "splithmc/targets.hpp"
#include "splithmc/theory.hpp"

using namespace splithmc;

namespace {

IntegratorSpec spec_sv(double h, std::int64_t n) {
  IntegratorSpec s;
  s.scheme = Scheme::StormerVerlet;
  s.h = h;
  s.n_steps = n;
  return s;
}

IntegratorSpec spec_family(double b, double h, std::int64_t n) {
  IntegratorSpec s;
  s.scheme = Scheme::SplitFamily;
  s.b = b;
  s.h = h;
  s.n_steps = n;
  return s;
}

IntegratorSpec spec_scaled(const GaussianDiagonalTarget& target, double b, std::int64_t n) {
  IntegratorSpec s;
  s.scheme = Scheme::ScaledSplitFamily;
  s.b = b;
  s.n_steps = n;
  s.sigma_scale = target.sigma_scale();
  return s;
}

}  // namespace

TEST_CASE("free flight when the potential vanishes") {
  const testutil::ZeroPotentialTarget flat(DiagonalMetric({1.0, 4.0}));
  const PhasePoint start({1.0, -2.0}, {0.5, 2.0});
  const double h = 0.7;

  const auto sv = stormer_verlet_step(flat, start, h);
  CHECK(sv.q[0] == doctest::Approx(1.0 + h * 0.5).epsilon(1e-15));
  CHECK(sv.q[1] == doctest::Approx(-2.0 + h * 0.5).epsilon(1e-15));
  CHECK(sv.p == start.p);

  const auto fam = split_family_step(flat, start, 0.25, h);
  CHECK(fam.q[0] == doctest::Approx(1.0 + h * 0.5).epsilon(1e-14));
  CHECK(fam.q[1] == doctest::Approx(-2.0 + h * 0.5).epsilon(1e-14));
  CHECK(fam.p == start.p);
}

TEST_CASE("Stormer-Verlet step matches the linear-map oracle on the oscillator") {
  const GaussianDiagonalTarget osc({1.0});
  const auto end = stormer_verlet_step(osc, PhasePoint({1.0}, {0.0}), 0.1);
  // One-step map applied to (1, 0): the first column (p, e - sigma q).
  CHECK(end.q[0] == doctest::Approx(0.995).epsilon(1e-15));
  CHECK(end.p[0] == doctest::Approx(-0.09975).epsilon(1e-15));

  const auto m = theory::one_step_matrix(theory::sv_coefficients(0.1, 1.0));
  CHECK(end.q[0] == doctest::Approx(m[0][0]).epsilon(1e-15));
  CHECK(end.p[0] == doctest::Approx(m[1][0]).epsilon(1e-15));
}

TEST_CASE("family step matches the linear-map oracle across (b, h)") {
  const GaussianDiagonalTarget osc({1.0});
  RngState rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const double b = rng.uniform(0.05, 0.45);
    const double h = rng.uniform(0.05, 2.0);
    const std::array<double, 2> y0{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
    const auto end = split_family_step(osc, PhasePoint({y0[0]}, {y0[1]}), b, h);
    const auto y1 =
        testutil::apply(theory::one_step_matrix(theory::family_coefficients(b, h, 1.0)), y0);
    CHECK(end.q[0] == doctest::Approx(y1[0]).epsilon(1e-12));
    CHECK(end.p[0] == doctest::Approx(y1[1]).epsilon(1e-12));
  }
}

TEST_CASE("momentum-flip reversibility for every scheme") {
  const GaussianDiagonalTarget diag({1.0, 0.5, 0.25});
  RngState rng(15);
  std::vector<double> q(3), p(3);
  for (int i = 0; i < 3; ++i) {
    q[i] = rng.uniform(-1.0, 1.0);
    p[i] = rng.uniform(-1.0, 1.0);
  }
  const PhasePoint start(q, p);

  auto check_reversible = [&](auto step) {
    const PhasePoint fwd = step(start);
    std::vector<double> pf = fwd.p;
    for (auto& v : pf) v = -v;
    const PhasePoint back = step(PhasePoint(fwd.q, pf));
    for (int i = 0; i < 3; ++i) {
      CHECK(back.q[i] == doctest::Approx(start.q[i]).epsilon(1e-10));
      CHECK(-back.p[i] == doctest::Approx(start.p[i]).epsilon(1e-10));
    }
  };

  check_reversible(
      [&](const PhasePoint& s) { return stormer_verlet_step(diag, s, 0.3); });
  check_reversible(
      [&](const PhasePoint& s) { return split_family_step(diag, s, 0.22, 0.3); });
  const auto sigma = diag.sigma_scale();
  check_reversible(
      [&](const PhasePoint& s) { return scaled_split_family_step(diag, s, 0.22, sigma); });
}

TEST_CASE("family step preserves energy exactly at the energy-null step (1-d)") {
  const GaussianDiagonalTarget osc({1.0});
  const double b = 0.25;
  const double h = theory::energy_null_step(b);
  const PhasePoint start({1.0}, {0.0});
  const double h0 = hamiltonian(osc, start).total;
  const auto end = split_family_step(osc, start, b, h);
  CHECK(std::abs(hamiltonian(osc, end).total - h0) < 1e-13);
}

TEST_CASE("scaled step: exact preservation, 1-d equivalence, rotation form") {
  {
    const GaussianDiagonalTarget target({1.0, 0.25});
    const auto sigma = target.sigma_scale();
    PhasePoint state({0.8, -0.1}, {0.2, 1.1});
    const double h0 = hamiltonian(target, state).total;
    for (int n = 0; n < 100; ++n)
      state = scaled_split_family_step(target, state, 0.2008, sigma);
    CHECK(std::abs(hamiltonian(target, state).total - h0) < 1e-12);
  }
  {
    // With sigma = 1 the scaled map is the plain family at the null step.
    const GaussianDiagonalTarget osc({1.0});
    const auto sigma = osc.sigma_scale();
    const double b = 0.21;
    const PhasePoint start({0.6}, {-0.9});
    const auto scaled = scaled_split_family_step(osc, start, b, sigma);
    const auto plain = split_family_step(osc, start, b, theory::energy_null_step(b));
    CHECK(scaled.q[0] == doctest::Approx(plain.q[0]).epsilon(1e-12));
    CHECK(scaled.p[0] == doctest::Approx(plain.p[0]).epsilon(1e-12));
  }
  {
    // After N steps the state is the start rotated by N * arccos(p).
    const GaussianDiagonalTarget osc({1.0});
    const double b = 0.2008;
    const auto c = theory::family_coefficients(b, theory::energy_null_step(b), 1.0);
    const double angle = 25.0 * std::acos(c.p);
    const std::array<double, 2> y0{0.3, 0.7};
    IntegratorSpec spec = spec_scaled(osc, b, 25);
    const auto traj = integrate(osc, spec, PhasePoint({y0[0]}, {y0[1]}));
    const double qe = std::cos(angle) * y0[0] + std::sin(angle) * y0[1];
    const double pe = -std::sin(angle) * y0[0] + std::cos(angle) * y0[1];
    CHECK(traj.end_state.q[0] == doctest::Approx(qe).epsilon(1e-10));
    CHECK(traj.end_state.p[0] == doctest::Approx(pe).epsilon(1e-10));
  }
}

TEST_CASE("scaled step rejects targets without diagonal Gaussian structure") {
  const std::vector<double> sigma{1.0};
  const testutil::ZeroPotentialTarget flat(DiagonalMetric::identity(1));
  CHECK_THROWS_AS(scaled_split_family_step(flat, PhasePoint({0.0}, {1.0}), 0.22, sigma),
                  ContractError);
}

TEST_CASE("integrate: contract checks and gradient accounting") {
  const GaussianDiagonalTarget osc({1.0});
  const PhasePoint start({1.0}, {0.3});

  CHECK_THROWS_AS(integrate(osc, spec_sv(0.1, 0), start), ContractError);
  CHECK_THROWS_AS(integrate(osc, spec_sv(-0.1, 5), start), ContractError);
  CHECK_THROWS_AS(integrate(osc, spec_family(0.5, 0.1, 5), start), ContractError);

  CHECK(integrate(osc, spec_sv(0.1, 7), start).n_gradient_evals == 14);
  CHECK(integrate(osc, spec_family(0.25, 0.1, 7), start).n_gradient_evals == 21);
  CHECK(integrate(osc, spec_scaled(osc, 0.25, 7), start).n_gradient_evals == 0);

  // The start state is not mutated.
  CHECK(start.q[0] == 1.0);
  CHECK(start.p[0] == 0.3);
}

TEST_CASE("integrate matches matrix powers for long trajectories, including unstable") {
  const GaussianDiagonalTarget osc({1.0});
  RngState rng(99);
  int unstable_seen = 0;
  for (int trial = 0; trial < 12; ++trial) {
    // Mildly unstable points are included on purpose; cap |p| so that growth
    // over 1000 steps stays inside double range.
    const double b = rng.uniform(0.05, 0.45);
    double h = rng.uniform(0.05, 2.0);
    if (trial % 4 == 3) h = rng.uniform(2.005, 2.02);  // SV-unstable, growth in range
    const std::array<double, 2> y0{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};

    const auto m_sv = theory::one_step_matrix(theory::sv_coefficients(h, 1.0));
    if (std::abs(m_sv[0][0]) > 1.0) ++unstable_seen;
    const auto pred_sv = testutil::apply(testutil::matpow(m_sv, 1000), y0);
    const auto traj_sv = integrate(osc, spec_sv(h, 1000), PhasePoint({y0[0]}, {y0[1]}));
    const double scale_sv =
        std::max({1.0, std::abs(pred_sv[0]), std::abs(pred_sv[1])});
    CHECK(std::abs(traj_sv.end_state.q[0] - pred_sv[0]) / scale_sv < 1e-10);
    CHECK(std::abs(traj_sv.end_state.p[0] - pred_sv[1]) / scale_sv < 1e-10);

    const auto m_fam = theory::one_step_matrix(theory::family_coefficients(b, h, 1.0));
    const auto pred = testutil::apply(testutil::matpow(m_fam, 1000), y0);
    const auto traj = integrate(osc, spec_family(b, h, 1000), PhasePoint({y0[0]}, {y0[1]}));
    const double scale = std::max({1.0, std::abs(pred[0]), std::abs(pred[1])});
    CHECK(std::abs(traj.end_state.q[0] - pred[0]) / scale < 1e-10);
    CHECK(std::abs(traj.end_state.p[0] - pred[1]) / scale < 1e-10);
  }
  CHECK(unstable_seen >= 2);
}

TEST_CASE("second order: end-state error scales as h^2 on the oscillator") {
  const GaussianDiagonalTarget osc({1.0});
  const double t_end = 1.0;
  auto end_error = [&](Scheme scheme, double h) {
    const auto n = static_cast<std::int64_t>(std::llround(t_end / h));
    IntegratorSpec spec = scheme == Scheme::StormerVerlet ? spec_sv(h, n)
                                                          : spec_family(0.35, h, n);
    const auto traj = integrate(osc, spec, PhasePoint({1.0}, {0.0}));
    const double qe = std::cos(t_end), pe = -std::sin(t_end);
    return std::hypot(traj.end_state.q[0] - qe, traj.end_state.p[0] - pe);
  };
  for (Scheme scheme : {Scheme::StormerVerlet, Scheme::SplitFamily}) {
    const std::array<double, 4> hs{0.2, 0.1, 0.05, 0.025};
    double slope_sum = 0.0;
    for (int i = 0; i + 1 < 4; ++i)
      slope_sum += std::log2(end_error(scheme, hs[i]) / end_error(scheme, hs[i + 1]));
    const double slope = slope_sum / 3.0;
    CHECK(slope > 1.8);
    CHECK(slope < 2.2);
  }
}

TEST_CASE("volume preservation: numerical Jacobian determinant is 1") {
  const GaussianDiagonalTarget diag({1.0, 0.5});
  auto map = [&](const std::vector<double>& x) {
    const PhasePoint s({x[0], x[1]}, {x[2], x[3]});
    const auto end = split_family_step(diag, s, 0.22, 0.4);
    return std::vector<double>{end.q[0], end.q[1], end.p[0], end.p[1]};
  };
  const double det = testutil::jacobian_determinant(map, {0.3, -0.4, 0.8, 0.1});
  CHECK(std::abs(det - 1.0) < 1e-8);
}

TEST_CASE("evaluation errors propagate without partial trajectories") {
  const CoxTarget cox = synthesize_cox(5, 4, 1.0, 0.3, 0.5);
  std::vector<double> q(cox.dimension(), 0.0), p(cox.dimension(), 0.0);
  q[0] = 1e6;  // drives the latent field far beyond the exp() guard
  p[0] = 1.0;
  CHECK_THROWS_AS(integrate(cox, spec_sv(0.5, 10), PhasePoint(q, p)), EvaluationError);
}
