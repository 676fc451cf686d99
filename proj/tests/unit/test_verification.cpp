// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "doctest.h"
#include "krf/error.hpp"
#include "krf/static_solver.hpp"
#include "krf/verification.hpp"
#include "models.hpp"

using namespace krf;

namespace {

struct ConstantRun {
  FlowProblem problem;
  StaticSolution stat;
  SemiFlatField semiflat;
  Trajectory trajectory;
  double psi = 0.0;
};

ConstantRun constant_run(double offset, double t_end) {
  ConstantRun r{testing::constant_problem(2, 8, 1.5, 0.3), {}, {}, {}, std::log(1.5 * 1.5 / 0.3)};
  r.semiflat = semiflat_solve(r.problem, 1e-12);
  r.stat = solve_static(r.problem, StaticMethod::kDampedNewton, 1e-12, 50, &r.semiflat);
  RunOptions o;
  o.t_end = t_end;
  o.dt0 = 1e-3;
  o.dt_max = 1e-3;
  o.phi_inf = r.stat.lifted;
  r.trajectory = run(r.problem, ScalarField(r.problem.grid, offset), o);
  return r;
}

}  // namespace

TEST_CASE("constant model sandwich passes with an interior margin") {
  ConstantRun r = constant_run(0.0, 1.0);
  const ScalarField phi0(r.problem.grid, 0.0);
  const Barrier u = make_subsolution(r.problem, r.stat.lifted, r.semiflat.rho, phi0);
  const Barrier v = make_supersolution(r.problem, r.stat.lifted, r.semiflat.rho, phi0);
  const ComparisonReport rep = sandwich_check(r.trajectory, u, v, 1e-6);
  CHECK(rep.pass);
  CHECK(rep.worst.magnitude <= 1e-12);
  CHECK(rep.per_time.size() == r.trajectory.snapshots.size());

  // Shifting psi up by 3 lifts u above the flow once (1 - e^{-t}) 3 beats |h(t)|.
  const Barrier bad(BarrierKind::kSub, u.params(),
                    Barrier::Shape{u.shape().a_const, u.shape().a_decay, u.shape().ell_coef, u.shape().c_sign},
                    [&] {
                      ScalarField s = r.stat.lifted;
                      for (double& x : s.values) x += 3.0;
                      return s;
                    }(),
                    r.semiflat.rho, ScalarField(r.problem.grid, 0.0), u.ode(), u.mask(), u.ring());
  const ComparisonReport fail = barrier_side_check(r.trajectory, bad, 1e-6);
  CHECK(!fail.pass);
  CHECK(fail.worst.magnitude > 0.1);
}

TEST_CASE("classification of the exact barriers on the constant model") {
  ConstantRun r = constant_run(0.0, 0.01);
  const ScalarField phi0(r.problem.grid, 0.0);
  const Barrier u = make_subsolution(r.problem, r.stat.lifted, r.semiflat.rho, phi0);
  const Barrier v = make_supersolution(r.problem, r.stat.lifted, r.semiflat.rho, phi0);
  const std::vector<double> times{0.1, 0.5, 1.0, 3.0};
  const ComparisonReport su = classify_viscosity(r.problem, u, times, 1e-10);
  const ComparisonReport sv = classify_viscosity(r.problem, v, times, 1e-10);
  CHECK(su.pass);
  CHECK(sv.pass);
  // The barriers are strict: the residual has a definite sign.
  CHECK(su.worst.magnitude < 0.0);
  CHECK(sv.worst.magnitude < 0.0);
}

TEST_CASE("rate fit recovers e^{-t} for a constant perturbation") {
  const ConstantRun r = constant_run(std::log(1.5 * 1.5 / 0.3) + 0.5, 6.0);
  const RateFit fit = convergence_rate_fit(r.trajectory, 1.0, 5.0);
  CHECK(fit.plain_slope == doctest::Approx(-1.0).epsilon(1e-3));
  CHECK(fit.points > 10);
  CHECK(fit.monotone_after_transient);
  CHECK_THROWS_AS(convergence_rate_fit(r.trajectory, 7.0, 8.0), ArgumentError);
  CHECK_THROWS_AS(convergence_rate_fit(r.trajectory, 2.0, 2.0), ArgumentError);
}

TEST_CASE("stress with identical pairs has no crossings") {
  const FlowProblem p = testing::product_problem(8);
  StressOptions o;
  o.t_end = 0.05;
  o.zero_bump = true;
  const ComparisonReport rep = discrete_comparison_stress(p, 1, 7, o);
  CHECK(rep.pass);
  CHECK(rep.metadata.at("wide_crossings") == 0.0);
  CHECK(rep.worst.magnitude <= 0.0);
  const ComparisonReport again = discrete_comparison_stress(p, 1, 7, o);
  CHECK(again.worst.magnitude == rep.worst.magnitude);
}

TEST_CASE("stress with ordered pairs stays ordered") {
  const FlowProblem p = testing::product_problem(8);
  StressOptions o;
  o.t_end = 0.05;
  const ComparisonReport rep = discrete_comparison_stress(p, 3, 11, o);
  CHECK(rep.pass);
}

TEST_CASE("calibration constant bounds the observed errors") {
  const Expression phi = Expression::parse("0.01*cos(y1)*cos(y2)");
  const CalibrationResult c = calibrate_tolerance([](int n) { return testing::product_problem(n); }, phi, {8, 16, 32});
  REQUIRE(c.errors.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) CHECK(c.errors[k] <= c.constant * c.spacings[k] * c.spacings[k] * (1 + 1e-12));
  CHECK(c.errors[2] < c.errors[0]);
  CHECK(c.tolerance(0.1) == doctest::Approx(10 * c.constant * 0.01));
}
