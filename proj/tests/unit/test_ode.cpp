// SPDX-License-Identifier: Apache-2.0
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>

#include "doctest.h"
#include "krf/error.hpp"
#include "krf/ode.hpp"

using namespace krf;

namespace {
std::vector<double> grid(double a, double b, double step) {
  std::vector<double> out;
  for (double t = a; t <= b + 1e-12; t += step) out.push_back(t);
  return out;
}
}  // namespace

TEST_CASE("zero and constant forcing") {
  const OdeSolution zero = solve_linear_reaction([](double) { return 0.0; }, grid(0, 5, 1));
  const OdeSolution one = solve_linear_reaction([](double) { return 1.0; }, grid(0, 5, 1));
  for (double t : grid(0, 10, 0.37)) {
    CHECK(zero(t) == 0.0);
    CHECK(one(t) == doctest::Approx(-std::expm1(-t)).epsilon(1e-13));
  }
}

TEST_CASE("log forcing: quadrature evaluator against tanh-sinh and RK4") {
  const Forcing r = [](double s) { return std::log(-std::expm1(-s)); };
  const OdeSolution y = solve_linear_reaction(r, grid(0, 2, 0.5), [](double t) { return t * std::log(t) - t; });
  boost::math::quadrature::tanh_sinh<double> ts;
  const double oracle = ts.integrate([&](double s) { return std::exp(s - 1.0) * r(s); }, 0.0, 1.0);
  CHECK(std::abs(y(1.0) - oracle) < 1e-9);
  CHECK(std::abs(y(1.0) - barrier_h(1)(1.0)) < 1e-9);
  CHECK(y.rk4_discrepancy() >= 0.0);
  CHECK(y.rk4_discrepancy() < 1e-8);
}

TEST_CASE("non-integrable forcing is rejected") {
  CHECK_THROWS_AS(solve_linear_reaction([](double s) { return 1.0 / (s * s); }, grid(0, 1, 0.5)), ArgumentError);
  CHECK_THROWS_AS(solve_linear_reaction([](double) { return std::nan(""); }, grid(0, 1, 0.5)), ArgumentError);
}

TEST_CASE("closed-form barrier ODEs") {
  for (int kappa : {1, 2, 3}) {
    const OdeSolution h = barrier_h(kappa);
    const OdeSolution g = barrier_g(kappa, 0.7);
    CHECK(h(0.0) == 0.0);
    CHECK(g(0.0) == doctest::Approx(0.0).epsilon(1e-15));
    for (double t : grid(0, 30, 0.05)) {
      CHECK(h(t) <= 0.0);
      CHECK(g(t) >= 0.0);
    }
    const double ch = measured_envelope_constant(h, grid(0, 30, 0.01));
    CHECK(std::isfinite(ch));
    CHECK(ch <= kappa + 1e-12);  // e^t h / (1 + t) increases to -kappa
    // ODE residual from a centered difference away from t = 0.
    for (double t : grid(1.0, 20.0, 0.5)) {
      const double d = 1e-4;
      const double fd = (h(t + d) - h(t - d)) / (2 * d);
      CHECK(std::abs(fd - h.derivative(t)) < 1e-7);
      const double fg = (g(t + d) - g(t - d)) / (2 * d);
      CHECK(std::abs(fg - g.derivative(t)) < 1e-7);
    }
  }
  CHECK_THROWS_AS(barrier_h(1)(-0.1), ArgumentError);
}

TEST_CASE("solution from a later start time") {
  const Forcing r = [](double s) { return std::sin(s); };
  const OdeSolution y = solve_linear_reaction_from(r, 2.0, 0.5, grid(2, 6, 1));
  // y' + y = sin t has the particular solution (sin t - cos t) / 2.
  const auto part = [](double t) { return 0.5 * (std::sin(t) - std::cos(t)); };
  for (double t : grid(2, 8, 0.3)) {
    const double exact = part(t) + (0.5 - part(2.0)) * std::exp(-(t - 2.0));
    CHECK(y(t) == doctest::Approx(exact).epsilon(1e-11));
  }
  CHECK_THROWS_AS(y(1.0), ArgumentError);
  CHECK(std::abs(rk4_linear_reaction(r, 2.0, 0.5, 5.0) - y(5.0)) < 1e-10);
}

TEST_CASE("property: superposition of forcings") {
  const Forcing a = [](double s) { return std::cos(3 * s); };
  const Forcing b = [](double s) { return std::exp(-s); };
  const OdeSolution ya = solve_linear_reaction(a, grid(0, 4, 1));
  const OdeSolution yb = solve_linear_reaction(b, grid(0, 4, 1));
  const OdeSolution ys = solve_linear_reaction([&](double s) { return 2 * a(s) - b(s); }, grid(0, 4, 1));
  for (double t : grid(0, 9, 0.45)) CHECK(ys(t) == doctest::Approx(2 * ya(t) - yb(t)).epsilon(1e-11));
  // y' + y = e^{-t}, y(0) = 0 gives t e^{-t}.
  for (double t : grid(0, 9, 0.45)) CHECK(yb(t) == doctest::Approx(t * std::exp(-t)).epsilon(1e-12));
}
