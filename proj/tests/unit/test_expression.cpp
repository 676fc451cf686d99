// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "krf/error.hpp"
#include "krf/expression.hpp"

using namespace krf;

namespace {
double eval(const std::string& s, double y1 = 0.0, double y2 = 0.0, double t = 0.0) {
  const double y[2] = {y1, y2};
  return Expression::parse(s)(y, t);
}
}  // namespace

TEST_CASE("arithmetic and functions") {
  CHECK(eval("1+0.3*cos(y1)") == doctest::Approx(1.3));
  CHECK(eval("2^3 - 10/4") == doctest::Approx(5.5));
  CHECK(eval("-2^2") == doctest::Approx(-4.0));
  CHECK(eval("exp(1) - e") == doctest::Approx(0.0));
  CHECK(eval("sin(y1)*y2 + t", std::numbers::pi / 2, 3.0, 0.5) == doctest::Approx(3.5));
  CHECK(eval("sqrt(4) + log(exp(2)) + tan(0)") == doctest::Approx(4.0));
  CHECK(eval("1e-3 * 2.5E2") == doctest::Approx(0.25));
}

TEST_CASE("parse errors carry line and column") {
  try {
    (void)Expression::parse("1 + * 2", 7, 10);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 7);
    CHECK(e.column() == 14);
  }
  CHECK_THROWS_AS(Expression::parse("cos(y1"), ParseError);
  CHECK_THROWS_AS(Expression::parse("foo(1)"), ParseError);
  CHECK_THROWS_AS(Expression::parse("y0"), ParseError);
  CHECK_THROWS_AS(Expression::parse(""), ParseError);
  CHECK_THROWS_AS(Expression::parse("1 2"), ParseError);
}

TEST_CASE("coordinate references") {
  const Expression e = Expression::parse("cos(y1) + y3*t");
  CHECK(e.max_coordinate() == 3);
  CHECK(e.depends_on_coordinate(0));
  CHECK_FALSE(e.depends_on_coordinate(1));
  CHECK(e.depends_on_time());
  const double y[1] = {0.0};
  CHECK_THROWS_AS(e(std::span<const double>(y, 1)), ArgumentError);
}

TEST_CASE("property: symbolic derivative matches a central difference") {
  const char* cases[] = {"0.15*cos(y1)*cos(y2) + 0.1*sin(y1)", "exp(0.2*cos(y1))*y2^2", "sin(y1*y2)/(2+cos(y2))",
                         "sqrt(2 + sin(y1)) - log(3 + cos(y2))", "tan(0.3*y1) - (y2)^3/7"};
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (const char* c : cases) {
    const Expression e = Expression::parse(c);
    for (int axis = 0; axis < 2; ++axis) {
      const Expression d = e.derivative(axis);
      for (int k = 0; k < 20; ++k) {
        double y[2] = {u(rng), u(rng)};
        const double h = 1e-5;
        double yp[2] = {y[0], y[1]};
        double ym[2] = {y[0], y[1]};
        yp[axis] += h;
        ym[axis] -= h;
        const double fd = (e(yp) - e(ym)) / (2 * h);
        CHECK(d(y) == doctest::Approx(fd).epsilon(1e-7));
      }
    }
  }
}
