// SPDX-License-Identifier: Apache-2.0
#include "krf/barriers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "krf/error.hpp"
#include "krf/ma_operator.hpp"
#include "krf/parallel.hpp"

namespace krf {

namespace {

constexpr double kSafety = 1.1;
constexpr double kT0Step = 0.05;
constexpr double kT0Max = 200.0;

void check_inputs(const FlowProblem& problem, const ScalarField& psi, const ScalarField& rho) {
  if (!problem.reaction.is_identity()) {
    throw ModelError("barriers are defined for the identity reaction F(t, x, r) = r");
  }
  if (!(psi.grid == problem.grid) || !(rho.grid == problem.grid)) {
    throw ArgumentError("barrier inputs live on different grids");
  }
}

double sup_of(const ScalarField& f, const std::vector<char>& mask,
              const std::function<double(std::size_t)>& value) {
  double s = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    s = std::max(s, value(i));
  }
  return s;
}

std::vector<double> ode_check_times(double t0) {
  std::vector<double> times;
  for (int k = 0; k <= 80; ++k) times.push_back(t0 + 0.5 * k);
  return times;
}

// Omega_r cap: keeps the region non-empty by never asking for more than the
// geometric middle of the profile range.
double region_cap(const DivisorModel& divisor) { return std::exp(0.5 * divisor.log_s_h.inf()); }

double clamp_radius(double log_r, const DivisorModel& divisor) {
  const double r = std::exp(std::min(log_r, std::log(region_cap(divisor))));
  return std::clamp(r, std::numeric_limits<double>::min(), 1.0);
}

}  // namespace

Barrier::Barrier(BarrierKind kind, BarrierParams params, Shape shape, ScalarField psi_lifted,
                 ScalarField rho, ScalarField ell, OdeSolution ode, std::vector<char> mask,
                 std::vector<char> ring)
    : kind_(kind),
      params_(params),
      shape_(shape),
      psi_(std::move(psi_lifted)),
      rho_(std::move(rho)),
      ell_(std::move(ell)),
      ode_(std::move(ode)),
      mask_(std::move(mask)),
      ring_(std::move(ring)) {}

double Barrier::value_at(double t, std::size_t i) const {
  const double e = std::exp(-t);
  return (shape_.a_const + shape_.a_decay * e) * psi_[i] + e * rho_[i] + shape_.ell_coef * ell_[i] +
         shape_.c_sign * params_.C * e + ode_(t);
}

ScalarField Barrier::value(double t, bool masked) const {
  if (!(t >= t_min())) throw ArgumentError("barrier evaluated before T0");
  const double e = std::exp(-t);
  const double y = ode_(t);
  const double a = shape_.a_const + shape_.a_decay * e;
  ScalarField out(psi_.grid, std::numeric_limits<double>::quiet_NaN());
  parallel_for(out.size(), [&](std::size_t i) {
    if (masked && !mask_[i]) return;
    out[i] = a * psi_[i] + e * rho_[i] + shape_.ell_coef * ell_[i] + shape_.c_sign * params_.C * e + y;
  });
  return out;
}

ScalarField Barrier::time_derivative(double t, bool masked) const {
  if (!(t >= t_min())) throw ArgumentError("barrier evaluated before T0");
  const double e = std::exp(-t);
  const double dy = ode_.derivative(t);
  ScalarField out(psi_.grid, std::numeric_limits<double>::quiet_NaN());
  parallel_for(out.size(), [&](std::size_t i) {
    if (masked && !mask_[i]) return;
    out[i] = -shape_.a_decay * e * psi_[i] - e * rho_[i] - shape_.c_sign * params_.C * e + dy;
  });
  return out;
}

double Barrier::offset_from_limit(double t) const {
  const ScalarField v = value(t);
  double worst = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (mask_[i]) worst = std::max(worst, std::abs(v[i] - psi_[i]));
  }
  return worst;
}

void require_rho_admissible(const FlowProblem& problem, const ScalarField& rho) {
  for (std::size_t i = 0; i < problem.grid.node_count(); ++i) {
    const SmallMatrix m = problem.a0.at(i) + central_hessian_at(rho, i);
    if (symmetric_eigenvalues(m)(0) < -1e-12 * m.norm()) {
      throw HypothesisError("A0 + D^2 rho is not positive semidefinite at node " + std::to_string(i));
    }
  }
}

Barrier make_subsolution(const FlowProblem& problem, const ScalarField& psi_lifted,
                         const ScalarField& rho, const ScalarField& phi0) {
  check_inputs(problem, psi_lifted, rho);
  if (!(phi0.grid == problem.grid)) throw ArgumentError("phi0 lives on a different grid");
  require_rho_admissible(problem, rho);

  BarrierParams p;
  p.C = sup_of(rho, {}, [&](std::size_t i) { return rho[i] - phi0[i]; });
  const std::size_t nodes = problem.grid.node_count();
  return Barrier(BarrierKind::kSub, p, Barrier::Shape{1.0, -1.0, 0.0, -1.0}, psi_lifted, rho,
                 ScalarField(problem.grid), barrier_h(problem.kappa()), std::vector<char>(nodes, 1),
                 std::vector<char>(nodes, 0));
}

double supersolution_exponent(const FlowProblem& problem, const ScalarField& psi_lifted,
                              const ScalarField& rho, double weight) {
  check_inputs(problem, psi_lifted, rho);
  const auto kappa = static_cast<std::size_t>(problem.kappa());
  const std::size_t nodes = problem.grid.node_count();
  std::vector<double> ratio(nodes);
  parallel_for(nodes, [&](std::size_t i) {
    const SmallMatrix chi = weight * (problem.achi.at(i) + central_hessian_at(psi_lifted, i));
    const SmallMatrix sf = problem.a0.at(i) + central_hessian_at(rho, i);
    const std::vector<double> c = pencil_coefficients(chi, sf);
    const double target = problem.binom * std::exp(psi_lifted[i]) * problem.f_mu[i];
    double lower = 0.0;
    for (std::size_t j = 0; j < kappa; ++j) lower += c[j];
    // Solver-level excess of the top term over its exact value.
    lower += std::max(0.0, c[kappa] - std::pow(weight, static_cast<double>(kappa)) * target);
    ratio[i] = lower / target;
  });
  const double worst = *std::max_element(ratio.begin(), ratio.end());
  return std::log(kSafety * worst);
}

Barrier make_supersolution(const FlowProblem& problem, const ScalarField& psi_lifted,
                           const ScalarField& rho, const ScalarField& phi0, std::optional<double> B) {
  check_inputs(problem, psi_lifted, rho);
  if (!(phi0.grid == problem.grid)) throw ArgumentError("phi0 lives on a different grid");
  BarrierParams p;
  p.C = sup_of(rho, {}, [&](std::size_t i) { return phi0[i] - rho[i]; });
  p.B = B ? *B : supersolution_exponent(problem, psi_lifted, rho);
  if (!std::isfinite(p.B)) throw InternalError("supersolution exponent B is not finite");
  const std::size_t nodes = problem.grid.node_count();
  return Barrier(BarrierKind::kSuper, p, Barrier::Shape{1.0, -1.0, 0.0, 1.0}, psi_lifted, rho,
                 ScalarField(problem.grid), barrier_g(problem.kappa(), p.B), std::vector<char>(nodes, 1),
                 std::vector<char>(nodes, 0));
}

ApproxBarrier make_approx_subsolution(const FlowProblem& problem, const DivisorModel& divisor,
                                      double epsilon, const ScalarField& psi_lifted,
                                      const ScalarField& rho, const FlowBounds& flow) {
  check_inputs(problem, psi_lifted, rho);
  if (!(epsilon > 0.0)) throw ArgumentError("approximate barrier: epsilon must be > 0");
  if (epsilon >= 0.5) throw HypothesisError("approximate subsolution needs epsilon < 1/2");
  if (divisor.a_curv > 1.0) {
    throw HypothesisError("approximate subsolution needs A_curv <= 1 so that chi + eps dd^c log|s| >= 0");
  }
  require_rho_admissible(problem, rho);
  const int kappa = problem.kappa();
  const ScalarField& ell = divisor.log_s_h;
  const double inf_psi = psi_lifted.inf();
  const double sup_psi = psi_lifted.sup();

  BarrierParams p;
  p.epsilon = epsilon;
  p.A = divisor.a_curv;
  // (1): (1 - eps) sup psi + (eps / 2) log r <= inf phi.
  p.r = clamp_radius(2.0 * (flow.phi_inf - (1.0 - epsilon) * sup_psi) / epsilon, divisor);
  std::vector<char> mask = divisor.omega_r_mask(p.r);
  std::vector<char> ring = divisor.boundary_ring(mask);
  const double log_r = std::log(p.r);

  double c_r = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    const SmallVector mu =
        generalized_eigenvalues(problem.a0.at(i) + central_hessian_at(rho, i), problem.a0.at(i));
    c_r = std::max(c_r, mu(mu.size() - 1));
  }
  p.B = std::log(kSafety * c_r);

  // T0: forcing positive with margin, and (2) e^{-T0} rho + (eps / 2) log r <= 0 on the ring.
  const double ring_rho = sup_of(rho, ring, [&](std::size_t i) { return rho[i]; });
  const auto admissible_t0 = [&](double t0) {
    const double base = -std::expm1(-t0) - epsilon;
    if (base <= 0.0) return false;
    if (std::pow(base, kappa) < 2.0 * std::exp(p.B - t0)) return false;
    return !(std::isfinite(ring_rho) && std::exp(-t0) * ring_rho + 0.5 * epsilon * log_r > 0.0);
  };
  double t0 = 0.0;
  while (!admissible_t0(t0)) {
    t0 += kT0Step;
    if (t0 > kT0Max) throw HypothesisError("approximate subsolution: no finite T0 makes the forcing positive");
  }
  auto [t_slice, phi_t0] = flow.slice_at_or_after(t0);
  p.T0 = t_slice;

  const double B = p.B;
  Forcing forcing = [=](double t) {
    return epsilon * inf_psi + std::log(std::pow(-std::expm1(-t) - epsilon, kappa) - std::exp(B - t));
  };
  OdeSolution h = solve_linear_reaction_from(forcing, p.T0, 0.0, ode_check_times(p.T0), "h_eps");

  // (3): u_eps(T0) <= phi_{T0} on Omega_r; also C >= -inf psi so the e^{-t} terms stay <= 0.
  const double e0 = std::exp(-p.T0);
  const double c3 = sup_of(rho, mask, [&](std::size_t i) {
    return ((1.0 - e0 - epsilon) * psi_lifted[i] + e0 * rho[i] + epsilon * ell[i] - phi_t0[i]) / e0;
  });
  p.C = std::max({c3, -inf_psi, 0.0});

  Barrier b(BarrierKind::kSub, p, Barrier::Shape{1.0 - epsilon, -1.0, epsilon, -1.0}, psi_lifted, rho, ell,
            std::move(h), std::move(mask), std::move(ring));
  return {p, std::move(b)};
}

ApproxBarrier make_approx_supersolution(const FlowProblem& problem, const DivisorModel& divisor,
                                        double epsilon, const ScalarField& psi_lifted,
                                        const ScalarField& rho, const FlowBounds& flow) {
  check_inputs(problem, psi_lifted, rho);
  if (!(epsilon > 0.0)) throw ArgumentError("approximate barrier: epsilon must be > 0");
  if (epsilon >= 0.5) throw HypothesisError("approximate supersolution needs epsilon < 1/2");
  const int kappa = problem.kappa();
  const ScalarField& ell = divisor.log_s_h;
  const double inf_psi = psi_lifted.inf();

  BarrierParams p;
  p.epsilon = epsilon;
  p.A = divisor.a_curv;
  const double w = 1.0 + epsilon * p.A;
  // (1): (1 + eps A) inf psi - (eps / 2) log r >= sup phi.
  p.r = clamp_radius(2.0 * (w * inf_psi - flow.phi_sup) / epsilon, divisor);
  std::vector<char> mask = divisor.omega_r_mask(p.r);
  std::vector<char> ring = divisor.boundary_ring(mask);
  const double log_r = std::log(p.r);

  // (2): e^{-T0} rho - (eps / 2) log r >= 0 on the ring.
  const double ring_neg_rho = sup_of(rho, ring, [&](std::size_t i) { return -rho[i]; });
  double t0 = 0.0;
  while (std::isfinite(ring_neg_rho) && std::exp(-t0) * ring_neg_rho + 0.5 * epsilon * log_r > 0.0) {
    t0 += kT0Step;
    if (t0 > kT0Max) throw HypothesisError("approximate supersolution: no finite T0 satisfies the ring condition");
  }

  p.B = supersolution_exponent(problem, psi_lifted, rho, w);
  if (!std::isfinite(p.B)) throw InternalError("supersolution exponent B is not finite");
  const double B = p.B;
  const double a = p.A;
  Forcing forcing = [=](double t) {
    const double x = B - t;
    const double top = std::pow(w, kappa);
    const double lg = x > 30.0 ? x + std::log1p(top * std::exp(-x)) : std::log(top + std::exp(x));
    return lg - a * epsilon * inf_psi;
  };

  auto [t_slice, phi_t0] = flow.slice_at_or_after(t0);
  p.T0 = t_slice;
  std::vector<double> times = ode_check_times(0.0);
  OdeSolution g = solve_linear_reaction_from(forcing, 0.0, 0.0, times, "g_eps");

  // (3): v_eps(T0) >= phi_{T0} on Omega_r.
  const double e0 = std::exp(-p.T0);
  const double g0 = g(p.T0);
  const double c3 = sup_of(rho, mask, [&](std::size_t i) {
    return (phi_t0[i] - (w * psi_lifted[i] + e0 * rho[i] - epsilon * ell[i] + g0)) / e0;
  });
  p.C = std::max(c3, 0.0);

  Barrier b(BarrierKind::kSuper, p, Barrier::Shape{w, 0.0, -epsilon, 1.0}, psi_lifted, rho, ell, std::move(g),
            std::move(mask), std::move(ring));
  return {p, std::move(b)};
}

}  // namespace krf
