// SPDX-License-Identifier: Apache-2.0
#include "krf/ode.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <limits>

#include "krf/error.hpp"

namespace krf {

namespace {

// Depth and tolerance are capped so that cancellation noise in the forcing
// cannot drive the recursion to exhaustive subdivision.
constexpr unsigned kMaxDepth = 12;
constexpr double kQuadTol = 1e-13;
constexpr double kRk4Start = 1e-6;

double integrate(const std::function<double(double)>& f, double a, double b) {
  if (b <= a) return 0.0;
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, kMaxDepth, kQuadTol, &err);
}

// int_a^b e^{s-t} R(s) ds split into unit pieces so the exponential weight
// never spans many decades inside one adaptive panel.
double weighted_integral(const Forcing& r, double a, double b, double t) {
  double total = 0.0;
  for (double lo = a; lo < b;) {
    const double hi = std::min(b, lo + 1.0);
    total += integrate([&](double s) { return std::exp(s - t) * r(s); }, lo, hi);
    lo = hi;
  }
  return total;
}

}  // namespace

OdeSolution::OdeSolution(std::string id, std::map<std::string, double> parameters, Forcing forcing,
                         std::function<double(double)> evaluator, double t_start)
    : id_(std::move(id)),
      parameters_(std::move(parameters)),
      forcing_(std::move(forcing)),
      evaluator_(std::move(evaluator)),
      t_start_(t_start) {}

double OdeSolution::operator()(double t) const {
  if (!(t >= t_start_)) throw ArgumentError("ODE solution evaluated before its start time");
  return evaluator_(t);
}

double OdeSolution::derivative(double t) const { return forcing(t) - (*this)(t); }

double OdeSolution::forcing(double t) const { return forcing_(t); }

void OdeSolution::record(const std::vector<double>& t_grid) {
  samples_.clear();
  samples_.reserve(t_grid.size());
  for (double t : t_grid) samples_.push_back({t, (*this)(t)});
}

double rk4_linear_reaction(const Forcing& forcing, double t0, double y0, double t1, double max_step) {
  double t = t0;
  double y = y0;
  const auto rhs = [&](double s, double v) { return forcing(s) - v; };
  while (t < t1) {
    double h = std::min(max_step, std::max(0.01 * t, 1e-12));
    if (t + h > t1 || t1 - (t + h) < 1e-14) h = t1 - t;
    const double k1 = rhs(t, y);
    const double k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1);
    const double k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2);
    const double k4 = rhs(t + h, y + h * k3);
    y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t += h;
  }
  return y;
}

OdeSolution solve_linear_reaction(Forcing forcing, const std::vector<double>& t_grid,
                                  LocalExpansion expansion, std::string id) {
  const double probe = 1e-12;
  const double near_zero = probe * std::abs(forcing(probe));
  if (!std::isfinite(near_zero) || near_zero > 1e-3) {
    throw ArgumentError("solve_linear_reaction: forcing is not integrable at 0");
  }
  for (double t : t_grid) {
    if (t < 0.0) throw ArgumentError("solve_linear_reaction: negative time in t_grid");
    if (t > 0.0 && !std::isfinite(forcing(t))) {
      throw ArgumentError("solve_linear_reaction: forcing is not finite at t = " + std::to_string(t));
    }
  }

  auto eval = [forcing](double t) {
    if (t <= 0.0) return 0.0;
    // s = tau^2 turns a log singularity at 0 into a bounded integrand.
    const double root = std::sqrt(t);
    const double split = std::min(root, 1.0);
    double y = integrate([&](double tau) {
      if (tau <= 0.0) return 0.0;
      return 2.0 * tau * std::exp(tau * tau - t) * forcing(tau * tau);
    }, 0.0, split);
    if (t > 1.0) y += weighted_integral(forcing, 1.0, t, t);
    return y;
  };
  OdeSolution sol(std::move(id), {}, forcing, eval, 0.0);
  sol.record(t_grid);

  if (expansion) {
    std::vector<double> sorted = t_grid;
    std::sort(sorted.begin(), sorted.end());
    double t = kRk4Start;
    double y = expansion(kRk4Start);
    double worst = 0.0;
    for (double target : sorted) {
      if (target < kRk4Start) continue;
      y = rk4_linear_reaction(forcing, t, y, target);
      t = target;
      worst = std::max(worst, std::abs(y - sol(target)));
    }
    sol.set_rk4_discrepancy(worst);
  }
  return sol;
}

OdeSolution solve_linear_reaction_from(Forcing forcing, double t0, double y0,
                                       const std::vector<double>& t_grid, std::string id) {
  if (!std::isfinite(forcing(t0))) throw ArgumentError("solve_linear_reaction_from: forcing not finite at t0");
  auto eval = [forcing, t0, y0](double t) {
    return y0 * std::exp(t0 - t) + weighted_integral(forcing, t0, t, t);
  };
  OdeSolution sol(std::move(id), {{"t0", t0}, {"y0", y0}}, forcing, eval, t0);
  sol.record(t_grid);

  std::vector<double> sorted = t_grid;
  std::sort(sorted.begin(), sorted.end());
  double t = t0;
  double y = y0;
  double worst = 0.0;
  for (double target : sorted) {
    if (target < t0) continue;
    y = rk4_linear_reaction(forcing, t, y, target, 1e-2);
    t = target;
    worst = std::max(worst, std::abs(y - sol(target)));
  }
  sol.set_rk4_discrepancy(worst);
  return sol;
}

OdeSolution barrier_h(int kappa) {
  if (kappa < 1) throw ArgumentError("barrier_h: kappa must be >= 1");
  const double k = kappa;
  Forcing forcing = [k](double t) { return k * std::log1p(-std::exp(-t)); };
  auto eval = [k](double t) {
    if (t <= 0.0) return 0.0;
    const double a = -std::expm1(-t);
    return k * (-t * std::exp(-t) + a * std::log1p(-std::exp(-t)));
  };
  return OdeSolution("h", {{"kappa", k}}, forcing, eval, 0.0);
}

OdeSolution barrier_g(int kappa, double B) {
  if (kappa < 1) throw ArgumentError("barrier_g: kappa must be >= 1");
  if (!std::isfinite(B)) throw ArgumentError("barrier_g: B must be finite");
  const double k = kappa;
  const double b = std::exp(B);
  Forcing forcing = [k, B](double t) {
    const double x = B - t;
    // ln(1 + e^x) without overflow.
    return k * (x > 30.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)));
  };
  auto eval = [k, b](double t) {
    if (t <= 0.0) return 0.0;
    const double q = b * std::exp(-t);
    return k * (q * t + (1.0 + q) * std::log1p(q) - std::exp(-t) * (1.0 + b) * std::log1p(b));
  };
  return OdeSolution("g", {{"kappa", k}, {"B", B}}, forcing, eval, 0.0);
}

double measured_envelope_constant(const OdeSolution& y, const std::vector<double>& times) {
  double c = 0.0;
  for (double t : times) {
    if (t < y.t_start()) continue;
    c = std::max(c, std::abs(y(t)) * std::exp(t) / (1.0 + t));
  }
  return c;
}

}  // namespace krf
