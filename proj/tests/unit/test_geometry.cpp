// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "krf/error.hpp"
#include "krf/geometry.hpp"
#include "krf/linalg.hpp"
#include "models.hpp"

using namespace krf;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

ModelSpec spec2(const std::string& a11, const std::string& a22, const std::string& chi, const std::string& f,
                bool normalize = true) {
  ModelSpec s;
  s.n_dims = 2;
  s.kappa = 1;
  s.points = {16, 16};
  s.a0.assign(2, std::vector<std::optional<Expression>>(2));
  s.a0[0][0] = Expression::parse(a11);
  s.a0[1][1] = Expression::parse(a22);
  s.achi.assign(1, std::vector<std::optional<Expression>>(1));
  s.achi[0][0] = Expression::parse(chi);
  s.f_mu = Expression::parse(f);
  s.normalize = normalize;
  return s;
}

// Independent oracle: composite midpoint rule on a fine grid.
double quadrature_1d(const std::function<double(double)>& f, int m = 4000) {
  double s = 0.0;
  for (int k = 0; k < m; ++k) s += f((k + 0.5) * kTwoPi / m);
  return s * kTwoPi / m;
}

}  // namespace

TEST_CASE("constant product model normalizes to unit masses") {
  const FlowProblem p = build_product_problem(spec2("1", "1", "1", "3"));
  for (double v : p.f_mu.values) CHECK(v == doctest::Approx(1.0 / (kTwoPi * kTwoPi)));
  CHECK(mixed_volume_density(p).integral() == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(p.binom == 2.0);
}

TEST_CASE("f_mu mass of 1 + 0.3 cos y matches a quadrature oracle") {
  ModelSpec s;
  s.n_dims = 1;
  s.kappa = 1;
  s.points = {32};
  s.a0 = {{Expression::constant(2.0)}};
  s.achi = {{Expression::constant(2.0)}};
  s.f_mu = Expression::parse("1 + 0.3*cos(y1)");
  const FlowProblem p = build_product_problem(s);
  const double oracle = quadrature_1d([](double y) { return 1 + 0.3 * std::cos(y); });
  CHECK(oracle == doctest::Approx(kTwoPi).epsilon(1e-12));
  CHECK(p.normalization.f_mu_mass_before == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(p.normalization.f_mu_scale == doctest::Approx(1.0 / kTwoPi).epsilon(1e-12));
}

TEST_CASE("indefinite A0 is a model error") {
  CHECK_THROWS_AS(build_product_problem(spec2("-0.1", "1", "1", "1")), ModelError);
  CHECK_THROWS_AS(build_product_problem(spec2("1", "1", "1", "cos(y1)")), ModelError);
  CHECK_THROWS_AS(build_product_problem(spec2("1", "1", "1 + 0.1*cos(y2)", "1")), ModelError);
}

TEST_CASE("theta_t interpolates A0 and Achi") {
  const FlowProblem p = build_product_problem(spec2("2", "2", "1", "1", false));
  const SmallMatrix th0 = theta_at_node(p, 5, 0.0);
  CHECK(th0(0, 0) == 2.0);
  CHECK(th0(1, 1) == 2.0);
  const SmallMatrix th = theta_at_node(p, 5, std::log(2.0));
  SmallMatrix oracle = 0.5 * p.a0.at(5) + 0.5 * p.achi.at(5);
  CHECK(th(0, 0) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(th(1, 1) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK((th - oracle).cwiseAbs().maxCoeff() < 1e-15);
  const SmallMatrix late = theta_at_node(p, 5, 60.0);
  CHECK(late(0, 0) == doctest::Approx(1.0));
  CHECK(late(1, 1) < 1e-20);
  CHECK_THROWS_AS(theta_at(p, -1.0), ArgumentError);
}

TEST_CASE("pushforward density") {
  SUBCASE("constant density") {
    const FlowProblem p = build_product_problem(spec2("1", "1", "1", "1"));
    const ScalarField w = pushforward_density(p);
    CHECK(w.size() == 16);
    for (double v : w.values) CHECK(v == doctest::Approx(1.0 / kTwoPi));
  }
  SUBCASE("separable density against a quadrature oracle") {
    const FlowProblem p = build_product_problem(spec2("1", "1", "1", "(1+0.5*cos(y1))*(1+0.5*cos(y2))", false));
    const ScalarField w = pushforward_density(p);
    const double fiber_mass = quadrature_1d([](double y) { return 1 + 0.5 * std::cos(y); });
    for (std::size_t b = 0; b < w.size(); ++b) {
      const double yb = w.grid.coordinate(b, 0);
      CHECK(w[b] == doctest::Approx((1 + 0.5 * std::cos(yb)) * fiber_mass).epsilon(1e-12));
    }
  }
}

TEST_CASE("semi-flat solve") {
  SUBCASE("fiber-constant A0 gives rho = 0 and c = fiber det") {
    const FlowProblem p = build_product_problem(spec2("1", "1.5 + 0.3*cos(y1)", "1", "1", false));
    const SemiFlatField sf = semiflat_solve(p, 1e-12);
    CHECK(sf.rho.sup() < 1e-12);
    CHECK(sf.rho.inf() > -1e-12);
    for (std::size_t b = 0; b < sf.fiber_constants.size(); ++b) {
      const double yb = p.grid.base_grid().coordinate(b, 0);
      CHECK(sf.fiber_constants[b] == doctest::Approx(1.5 + 0.3 * std::cos(yb)).epsilon(1e-12));
    }
  }
  SUBCASE("perturbed fiber: det(1 + 0.2 cos cos + rho'') is constant along each fiber") {
    const FlowProblem p = build_product_problem(spec2("1", "1 + 0.2*cos(y2)*cos(y1)", "1", "1", false));
    const SemiFlatField sf = semiflat_solve(p, 1e-11);
    CHECK(sf.rho.sup() > 1e-3);
    // Independent residual: the 1-D second difference along the fiber.
    const TorusGrid& g = p.grid;
    const double h = g.spacing(1);
    double worst = 0.0;
    for (std::size_t i = 0; i < g.node_count(); ++i) {
      const double d2 = (sf.rho[g.neighbor(i, 1, 1)] - 2 * sf.rho[i] + sf.rho[g.neighbor(i, 1, -1)]) / (h * h);
      const double det = p.a0.entry(i, 1, 1) + d2;
      worst = std::max(worst, std::abs(det / sf.fiber_constants[g.base_index(i)] - 1.0));
    }
    CHECK(worst < 1e-10);
    CHECK(sf.max_fiber_mean < 1e-12);
  }
  SUBCASE("tolerance below the documented minimum is rejected") {
    const FlowProblem p = build_product_problem(spec2("1", "1", "1", "1"));
    CHECK_THROWS_AS(semiflat_solve(p, 0.0), SolverError);
  }
}

TEST_CASE("regular family") {
  SUBCASE("constant family has E = 0") {
    const FlowProblem p = testing::constant_problem(2, 8, 1.3, 1.0);
    CHECK(check_regular_family(p, 0.1, 5.0, 21).e_of_epsilon == doctest::Approx(0.0).epsilon(1e-14));
  }
  SUBCASE("A0 = 2I, Achi = diag(1, 0) against a generalized-eigenvalue oracle") {
    const FlowProblem p = build_product_problem(spec2("2", "2", "1", "1", false));
    double prev = 1e300;
    for (double eps : {0.4, 0.2, 0.1, 0.05}) {
      const RegularityCertificate c = check_regular_family(p, eps, 10.0, 101);
      CHECK(c.e_of_epsilon > 0.0);
      CHECK(c.e_of_epsilon < prev);
      prev = c.e_of_epsilon;
      // theta_s = diag(1 + e^{-s}, 2 e^{-s}); the ratio of theta_t' to theta_t
      // is largest in the fiber direction, e^{|t - t'|}.
      CHECK(c.e_of_epsilon <= std::expm1(eps) + 1e-12);
    }
  }
  SUBCASE("epsilon = 0 is an argument error") {
    const FlowProblem p = testing::constant_problem(1, 8, 1.0, 1.0);
    CHECK_THROWS_AS(check_regular_family(p, 0.0, 1.0, 5), ArgumentError);
  }
}

TEST_CASE("property: mixed volume density matches the pencil expansion") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (int trial = 0; trial < 20; ++trial) {
    ModelSpec s = spec2("1", "1", "1", "1", false);
    s.a0[0][0] = Expression::constant(1.0 + u(rng));
    s.a0[0][1] = Expression::constant(u(rng));
    s.a0[1][1] = Expression::constant(1.0 + u(rng));
    s.achi[0][0] = Expression::constant(1.0 + u(rng));
    const FlowProblem p = build_product_problem(s);
    const SmallMatrix a = p.a0.at(0);
    // det(lambda chi + A0) with chi = diag(x, 0): lambda^1 coefficient is x * a22.
    const double oracle = p.achi.entry(0, 0, 0) * a(1, 1) / 2.0;
    CHECK(mixed_volume_density(p)[0] == doctest::Approx(oracle).epsilon(1e-13));
  }
}
