// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "doctest.h"
#include "krf/error.hpp"
#include "krf/linalg.hpp"
#include "krf/ma_operator.hpp"
#include "krf/static_solver.hpp"
#include "models.hpp"

using namespace krf;

TEST_CASE("constant model has the closed-form solution") {
  for (int n : {1, 2}) {
    const double a = 1.5;
    const double f = 0.3;
    const FlowProblem p = testing::constant_problem(n, 8, a, f);
    for (StaticMethod m : {StaticMethod::kDampedNewton, StaticMethod::kPseudoTime}) {
      const StaticSolution s = solve_static(p, m, 1e-12, 400);
      const double exact = std::log(std::pow(a, n) / f);
      for (double v : s.psi.values) CHECK(v == doctest::Approx(exact).epsilon(1e-11));
      CHECK(s.final_residual <= 1e-12);
      CHECK(!s.residual_history.empty());
    }
  }
}

TEST_CASE("Newton and pseudo-time agree on the product model") {
  const FlowProblem p = testing::product_problem(16);
  const SemiFlatField sf = semiflat_solve(p, 1e-12);
  const StaticSolution a = solve_static(p, StaticMethod::kDampedNewton, 1e-12, 100, &sf);
  const StaticSolution b = solve_static(p, StaticMethod::kPseudoTime, 1e-12, 2000, &sf);
  double diff = 0.0;
  for (std::size_t i = 0; i < a.psi.size(); ++i) diff = std::max(diff, std::abs(a.psi[i] - b.psi[i]));
  CHECK(diff < 1e-9);

  // Independent residual: det(X + D^2 psi) - e^psi W on the base grid.
  const MetricField x = base_metric(p);
  const ScalarField w = base_density(p, sf);
  const MetricField h = discrete_hessian(a.psi);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.psi.size(); ++i) {
    const double det = (x.at(i) + h.at(i)).determinant();
    worst = std::max(worst, std::abs(det - std::exp(a.psi[i]) * w[i]));
  }
  CHECK(worst <= 1e-12 * w.sup() * 1.0001);
}

TEST_CASE("static solve rejects bad input") {
  const FlowProblem p = testing::product_problem(8);
  const MetricField x = base_metric(p);
  ScalarField w(x.grid(), 1.0);
  w[3] = 0.0;
  CHECK_THROWS_AS(solve_base_equation(x, w, StaticMethod::kDampedNewton, 1e-10, 10), ModelError);
  ScalarField ok(x.grid(), 1.0);
  CHECK_THROWS_AS(solve_base_equation(x, ok, StaticMethod::kDampedNewton, 0.0, 10), ArgumentError);
  CHECK_THROWS_AS(solve_base_equation(x, ok, StaticMethod::kDampedNewton, 1e-10, 0), ArgumentError);
  CHECK_THROWS_AS(solve_static(testing::product_problem(16), StaticMethod::kDampedNewton, 1e-14, 1), SolverError);
}

TEST_CASE("lift is constant along fibers") {
  const FlowProblem p = testing::product_problem(8);
  const TorusGrid base = p.grid.base_grid();
  ScalarField psi(base);
  for (std::size_t b = 0; b < base.node_count(); ++b) psi[b] = std::sin(base.coordinate(b, 0));
  const ScalarField lifted = lift_to_total(p, psi);
  for (std::size_t i = 0; i < lifted.size(); ++i) CHECK(lifted[i] == psi[p.grid.base_index(i)]);
  CHECK_THROWS_AS(lift_to_total(p, ScalarField(p.grid, 0.0)), ArgumentError);
}

TEST_CASE("semi-flat identity defect vanishes for fiber-constant density") {
  const FlowProblem p = testing::product_problem(16);
  const SemiFlatField sf = semiflat_solve(p, 1e-12);
  const StaticSolution s = solve_static(p, StaticMethod::kDampedNewton, 1e-12, 100, &sf);
  CHECK(semiflat_identity_defect(p, s.lifted, sf.rho).sup() < 1e-9);
}
