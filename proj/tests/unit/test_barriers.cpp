// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "doctest.h"
#include "krf/barriers.hpp"
#include "krf/error.hpp"
#include "krf/static_solver.hpp"
#include "krf/verification.hpp"
#include "models.hpp"

using namespace krf;

namespace {

struct Setup {
  FlowProblem problem;
  SemiFlatField semiflat;
  StaticSolution psi;
  ScalarField phi0;
};

Setup product_setup(int points) {
  Setup s{testing::product_problem(points), {}, {}, {}};
  s.semiflat = semiflat_solve(s.problem, 1e-12);
  s.psi = solve_static(s.problem, StaticMethod::kDampedNewton, 1e-12, 100, &s.semiflat);
  s.phi0 = sample_expression(s.problem.grid, Expression::parse(testing::product_phi0()));
  return s;
}

FlowBounds trivial_bounds(const ScalarField& phi) {
  FlowBounds b;
  b.phi_inf = phi.inf();
  b.phi_sup = phi.sup();
  b.slice_at_or_after = [phi](double t) { return std::make_pair(t, phi); };
  return b;
}

}  // namespace

TEST_CASE("exact barriers bracket the initial data and each other") {
  const Setup s = product_setup(16);
  const Barrier u = make_subsolution(s.problem, s.psi.lifted, s.semiflat.rho, s.phi0);
  const Barrier v = make_supersolution(s.problem, s.psi.lifted, s.semiflat.rho, s.phi0);
  const ScalarField u0 = u.value(0.0);
  const ScalarField v0 = v.value(0.0);
  double c_sub = -1e300;
  double c_super = -1e300;
  for (std::size_t i = 0; i < s.phi0.size(); ++i) {
    c_sub = std::max(c_sub, s.semiflat.rho[i] - s.phi0[i]);
    c_super = std::max(c_super, s.phi0[i] - s.semiflat.rho[i]);
  }
  CHECK(u.params().C == doctest::Approx(c_sub).epsilon(1e-14));
  CHECK(v.params().C == doctest::Approx(c_super).epsilon(1e-14));
  for (std::size_t i = 0; i < s.phi0.size(); ++i) {
    CHECK(u0[i] == doctest::Approx(s.semiflat.rho[i] - c_sub).epsilon(1e-13));
    CHECK(u0[i] <= s.phi0[i] + 1e-14);
    CHECK(v0[i] >= s.phi0[i] - 1e-14);
  }
  for (double t : {0.0, 0.3, 1.0, 4.0, 15.0}) {
    const ScalarField a = u.value(t);
    const ScalarField b = v.value(t);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] - a[i] >= -1e-14);
  }
  CHECK_THROWS_AS(u.value(-1.0), ArgumentError);
}

TEST_CASE("constant model: barriers against the scalar flow oracle") {
  // With A0 = chi = a I and constant f the flow of a constant is
  // phi(t) = psi (1 - e^{-t}), psi = ln(a^2 / f).
  const double a = 1.5;
  const double f = 0.3;
  const FlowProblem p = testing::constant_problem(2, 8, a, f);
  const SemiFlatField sf = semiflat_solve(p, 1e-12);
  const StaticSolution st = solve_static(p, StaticMethod::kDampedNewton, 1e-12, 50, &sf);
  const double psi = std::log(a * a / f);
  const ScalarField phi0(p.grid, 0.0);
  const Barrier u = make_subsolution(p, st.lifted, sf.rho, phi0);
  const Barrier v = make_supersolution(p, st.lifted, sf.rho, phi0);
  const OdeSolution h = barrier_h(2);
  for (double t : {0.0, 0.5, 2.0, 7.0}) {
    const double flow = psi * (1 - std::exp(-t));
    CHECK(u.value_at(t, 5) == doctest::Approx(flow + h(t)).epsilon(1e-12));
    CHECK(u.value_at(t, 5) <= flow + 1e-13);
    CHECK(v.value_at(t, 5) >= flow - 1e-13);
  }
  CHECK(u.offset_from_limit(40.0) < 1e-12);
}

TEST_CASE("barriers require the identity reaction") {
  ModelSpec s = testing::product_spec(8);
  s.reaction = ReactionSpec::affine(2.0, Expression::constant(0.0));
  const FlowProblem p = build_product_problem(s);
  const SemiFlatField sf = semiflat_solve(p, 1e-12);
  const ScalarField zero(p.grid, 0.0);
  CHECK_THROWS_AS(make_subsolution(p, zero, sf.rho, zero), ModelError);
}

TEST_CASE("divisor profile validation and curvature constant") {
  const FlowProblem p = testing::product_problem(16);
  const Expression good = Expression::parse(testing::product_divisor());
  const DivisorModel d = build_divisor_model(p, sample_expression(p.grid, good));

  // Oracle: second differences of log profile along y1 against the chi entry.
  const TorusGrid& g = p.grid;
  const double hh = g.spacing(0) * g.spacing(0);
  double oracle = 0.0;
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    const auto l = [&](std::size_t k) { return -0.5 * (1 - std::cos(g.coordinate(k, 0))); };
    const double d2 = (l(g.neighbor(i, 0, 1)) - 2 * l(i) + l(g.neighbor(i, 0, -1))) / hh;
    oracle = std::max(oracle, -d2 / p.achi.at(i)(0, 0));
  }
  CHECK(d.a_curv == doctest::Approx(oracle).epsilon(1e-10));

  const auto mask = d.omega_r_mask(0.5);
  const auto ring = d.boundary_ring(mask);
  std::size_t inside = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    inside += mask[i];
    if (ring[i]) CHECK(mask[i]);
  }
  CHECK(inside > 0);
  CHECK(inside < mask.size());

  CHECK_THROWS_AS(build_divisor_model(p, sample_expression(g, Expression::parse("1.5"))), ArgumentError);
  CHECK_THROWS_AS(build_divisor_model(p, sample_expression(g, Expression::parse("0"))), ArgumentError);
  CHECK_THROWS_AS(build_divisor_model(p, sample_expression(g, Expression::parse("0.5 + 0.1*cos(y2)"))),
                  ArgumentError);
}

TEST_CASE("approximate barrier hypotheses") {
  const Setup s = product_setup(16);
  const FlowBounds b = trivial_bounds(s.phi0);
  const DivisorModel d =
      build_divisor_model(s.problem, sample_expression(s.problem.grid, Expression::parse(testing::product_divisor())));
  CHECK_THROWS_AS(make_approx_subsolution(s.problem, d, 0.0, s.psi.lifted, s.semiflat.rho, b), ArgumentError);
  CHECK_THROWS_AS(make_approx_subsolution(s.problem, d, 0.5, s.psi.lifted, s.semiflat.rho, b), HypothesisError);
  CHECK_THROWS_AS(make_approx_supersolution(s.problem, d, -0.1, s.psi.lifted, s.semiflat.rho, b), ArgumentError);
  CHECK_THROWS_AS(make_approx_supersolution(s.problem, d, 0.7, s.psi.lifted, s.semiflat.rho, b), HypothesisError);

  const DivisorModel steep = build_divisor_model(
      s.problem, sample_expression(s.problem.grid, Expression::parse("exp(-20*(1 - cos(y1)))")));
  CHECK(steep.a_curv > 1.0);
  CHECK_THROWS_AS(make_approx_subsolution(s.problem, steep, 0.1, s.psi.lifted, s.semiflat.rho, b), HypothesisError);

  const ApproxBarrier ue = make_approx_subsolution(s.problem, d, 0.1, s.psi.lifted, s.semiflat.rho, b);
  const ApproxBarrier ve = make_approx_supersolution(s.problem, d, 0.1, s.psi.lifted, s.semiflat.rho, b);
  CHECK(ue.params.epsilon == 0.1);
  CHECK(ue.params.T0 >= 0.0);
  CHECK(ue.barrier.kind() == BarrierKind::kSub);
  CHECK(ve.barrier.kind() == BarrierKind::kSuper);
  CHECK_THROWS_AS(ue.barrier.value(ue.params.T0 - 1.0), ArgumentError);
  const ScalarField val = ue.barrier.value(ue.params.T0 + 1.0);
  for (std::size_t i = 0; i < val.size(); ++i) {
    if (ue.barrier.mask()[i]) {
      CHECK(std::isfinite(val[i]));
    } else {
      CHECK(std::isnan(val[i]));
    }
  }
}
