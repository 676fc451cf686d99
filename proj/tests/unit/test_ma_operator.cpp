// SPDX-License-Identifier: Apache-2.0
#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "krf/error.hpp"
#include "krf/ma_operator.hpp"
#include "models.hpp"

using namespace krf;

namespace {

ModelSpec flat_spec(int n, int kappa, int points) {
  ModelSpec s;
  s.n_dims = n;
  s.kappa = kappa;
  s.points.assign(static_cast<std::size_t>(n), points);
  s.a0.assign(static_cast<std::size_t>(n), std::vector<std::optional<Expression>>(static_cast<std::size_t>(n)));
  s.achi.assign(static_cast<std::size_t>(kappa), std::vector<std::optional<Expression>>(static_cast<std::size_t>(kappa)));
  s.normalize = false;
  return s;
}

// Oracle for det_plus: product of eigenvalues if all are >= 0, else 0.
double det_plus_oracle(const SmallMatrix& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(m), Eigen::EigenvaluesOnly);
  const Eigen::VectorXd ev = es.eigenvalues();
  if (ev.minCoeff() < 0.0) return 0.0;
  return ev.prod();
}

}  // namespace

TEST_CASE("discrete Hessian of constants vanishes") {
  const TorusGrid g = build_torus_grid(2, {8, 8}, 1);
  const MetricField h = discrete_hessian(ScalarField(g, 3.7));
  for (std::size_t i = 0; i < g.node_count(); ++i) CHECK(h.at(i).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("discrete Hessian of cos y matches the analytic second derivative") {
  const TorusGrid g = build_torus_grid(1, {64}, 1);
  const ScalarField f = sample_field(g, [](std::span<const double> y) { return std::cos(y[0]); });
  const MetricField h = discrete_hessian(f);
  double err = 0.0;
  for (std::size_t i = 0; i < g.node_count(); ++i) err = std::max(err, std::abs(h.entry(i, 0, 0) + std::cos(g.coordinate(i, 0))));
  const double bound = (std::numbers::pi / 32) * (std::numbers::pi / 32);
  CHECK(err <= bound);
}

TEST_CASE("cross difference of cos y1 cos y2 is second order") {
  double prev = 0.0;
  for (int n : {16, 32, 64}) {
    const TorusGrid g = build_torus_grid(2, {n, n}, 2);
    const ScalarField f = sample_field(g, [](std::span<const double> y) { return std::cos(y[0]) * std::cos(y[1]); });
    const MetricField h = discrete_hessian(f);
    double err = 0.0;
    for (std::size_t i = 0; i < g.node_count(); ++i) {
      err = std::max(err, std::abs(h.entry(i, 0, 1) - std::sin(g.coordinate(i, 0)) * std::sin(g.coordinate(i, 1))));
    }
    if (prev > 0.0) CHECK(prev / err == doctest::Approx(4.0).epsilon(0.05));
    prev = err;
  }
}

TEST_CASE("det_plus") {
  SmallMatrix a(2, 2);
  a << 2, 0, 0, 3;
  CHECK(det_plus(a) == doctest::Approx(6.0));
  a << -1, 0, 0, 5;
  CHECK(det_plus(a) == 0.0);
  SUBCASE("property: random symmetric 3x3 against the eigenvalue oracle") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
      SmallMatrix m(3, 3);
      for (int i = 0; i < 3; ++i)
        for (int j = i; j < 3; ++j) m(i, j) = m(j, i) = u(rng);
      if (trial % 2 == 0) m += 1.5 * SmallMatrix::Identity(3, 3);
      CHECK(det_plus(m) == doctest::Approx(det_plus_oracle(m)).epsilon(1e-12));
    }
  }
}

TEST_CASE("ma_density on constant models") {
  SUBCASE("n = kappa = 1 gives density 1") {
    const FlowProblem p = testing::constant_problem(1, 8, 1.0, 1.0);
    for (double t : {0.0, 0.7, 5.0}) {
      const ScalarField d = ma_density(p, t, ScalarField(p.grid));
      for (double v : d.values) CHECK(v == doctest::Approx(1.0));
    }
  }
  SUBCASE("n = 2, kappa = 1, A0 = I, Achi = diag(1, 0) gives 1/2") {
    ModelSpec s = flat_spec(2, 1, 8);
    const FlowProblem p = build_product_problem(s);
    for (double t : {0.0, 1.0, 4.0}) {
      // det theta_t = 1 * e^{-t}, divided by C(2,1) e^{-t}.
      const ScalarField d = ma_density(p, t, ScalarField(p.grid));
      for (double v : d.values) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
    }
  }
}

TEST_CASE("clamped and strict densities at an indefinite node") {
  const FlowProblem p = testing::constant_problem(1, 8, 1.0, 1.0);
  ScalarField phi(p.grid);
  phi[3] = 1.0;  // D^2 phi = -2 / h^2 at node 3
  const ScalarField d = ma_density(p, 0.0, phi);
  CHECK(d[3] == 0.0);
  CHECK(d[2] > 1.0);
  CHECK_THROWS_AS(ma_density_strict(p, 0.0, phi), AdmissibilityError);
}

TEST_CASE("residual at the stationary point of the constant model") {
  const double a = 1.3;
  const double f = 0.4;
  const FlowProblem p = testing::constant_problem(2, 8, a, f);
  // det(a I) = C(2,2) e^psi f  =>  psi = log(a^2 / f).
  const double psi = std::log(a * a / f);
  ScalarField zero(p.grid);
  ResidualOptions opt;
  opt.tol = 1e-12;
  const ResidualField r0 = residual(p, 2.0, ScalarField(p.grid, psi), zero, HessianStencil::central(), opt);
  for (std::size_t i = 0; i < r0.r.size(); ++i) {
    CHECK(std::abs(r0.r[i]) < 1e-12);
    CHECK(r0.tags[i] == ResidualTag::kBoth);
  }
  const ResidualField r1 = residual(p, 2.0, ScalarField(p.grid, psi + 0.5), zero);
  for (std::size_t i = 0; i < r1.r.size(); ++i) {
    CHECK(r1.r[i] == doctest::Approx(-0.5));
    CHECK(is_super_ok(r1.tags[i]));
    CHECK_FALSE(is_sub_ok(r1.tags[i]));
  }
  const ResidualField r2 = residual(p, 2.0, ScalarField(p.grid, psi), ScalarField(p.grid, 10.0));
  for (double v : r2.r) CHECK(v == doctest::Approx(-10.0));
  CHECK(r2.worst_super_violation() < 0.0);
  CHECK(r2.worst_sub_violation() == doctest::Approx(10.0));
  opt.relative_floor = 0.0;
  CHECK_THROWS_AS(residual(p, 0.0, zero, zero, HessianStencil::central(), opt), ConfigurationError);
}

TEST_CASE("wide stencil") {
  const TorusGrid g = build_torus_grid(2, {16, 16}, 1);
  const HessianStencil w = HessianStencil::wide(g, 1);
  CHECK(w.directions().size() == 4);  // (0,1), (1,-1), (1,0), (1,1)
  CHECK(w.bases().size() == 2);
  CHECK_THROWS_AS(HessianStencil::wide(g, 0), ArgumentError);

  SUBCASE("agrees with the exact determinant on diagonal quadratics") {
    const FlowProblem p = testing::constant_problem(2, 16, 1.0, 1.0);
    const ScalarField zero(p.grid);
    const SmallMatrix th = theta_at_node(p, 0, 0.0);
    CHECK(stencil_determinant(th, zero, 7, w).det == doctest::Approx(1.0));
  }

  SUBCASE("property: monotone in neighbors and antitone in the center") {
    const FlowProblem p = testing::product_problem(16);
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> u(-1e-3, 1e-3);
    for (int trial = 0; trial < 30; ++trial) {
      ScalarField phi = sample_field(p.grid, [&](std::span<const double>) { return u(rng); });
      const std::size_t node = rng() % p.grid.node_count();
      const SmallMatrix th = theta_at_node(p, node, 0.3);
      const double base = stencil_determinant(th, phi, node, w).det;
      ScalarField up = phi;
      const int off[2] = {1, static_cast<int>(rng() % 3) - 1};
      up[p.grid.shifted(node, off)] += 1e-4;
      CHECK(stencil_determinant(th, up, node, w).det >= base);
      ScalarField center = phi;
      center[node] += 1e-4;
      CHECK(stencil_determinant(th, center, node, w).det <= base);
    }
  }
}

TEST_CASE("linearized log det matches a finite-difference directional derivative") {
  const FlowProblem p = testing::product_problem(12);
  const MetricField theta = theta_at(p, 0.5);
  const ScalarField phi = sample_field(p.grid, [](std::span<const double> y) { return 0.002 * std::sin(y[0] + 2 * y[1]); });
  const LogDetLinearization lin = linearize_log_det(theta, phi);
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd d(static_cast<Eigen::Index>(phi.size()));
  for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = u(rng);
  const Eigen::VectorXd jd = lin.jacobian * d;
  const double h = 1e-7;
  ScalarField plus = phi, minus = phi;
  for (std::size_t i = 0; i < phi.size(); ++i) {
    plus[i] += h * d(static_cast<Eigen::Index>(i));
    minus[i] -= h * d(static_cast<Eigen::Index>(i));
  }
  const std::vector<double> lp = log_det_field(theta, plus);
  const std::vector<double> lm = log_det_field(theta, minus);
  for (std::size_t i = 0; i < phi.size(); ++i) {
    CHECK((lp[i] - lm[i]) / (2 * h) == doctest::Approx(jd(static_cast<Eigen::Index>(i))).epsilon(1e-5));
  }
}
