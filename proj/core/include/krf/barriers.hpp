// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "krf/geometry.hpp"
#include "krf/ode.hpp"

namespace krf {

/// Synthetic log|s|_h for the approximate barriers. The profile is a strictly
/// positive function in (0, 1] of the base coordinates only.
struct DivisorModel {
  ScalarField log_s_h;  // log of the profile, <= 0
  /// Smallest A >= 0 with -D^2 log_s_h <= A * Achi on the base block at every node.
  double a_curv = 0.0;

  /// Nodes with profile >= r.
  std::vector<char> omega_r_mask(double r) const;
  /// In-mask nodes with an axis neighbor outside the mask.
  std::vector<char> boundary_ring(const std::vector<char>& mask) const;
};

/// Throws ArgumentError if the profile leaves (0, 1] (beyond 1e-12), depends on
/// fiber coordinates, or lives on another grid.
DivisorModel build_divisor_model(const FlowProblem& problem, const ScalarField& profile);

enum class BarrierKind { kSub, kSuper };

struct BarrierParams {
  double C = 0.0;
  double B = 0.0;
  double epsilon = 0.0;
  double A = 0.0;
  double r = 1.0;
  double T0 = 0.0;
};

/// A barrier of the form
///   a(t) psi + e^{-t} rho + ell_coef * ell + sign * C e^{-t} + y(t),
/// a(t) = a_const + a_decay e^{-t}, with y solving y' + y = R(t). Its exact
/// time derivative follows from the same formula and y' = R - y.
class Barrier {
 public:
  struct Shape {
    double a_const = 1.0;
    double a_decay = -1.0;
    double ell_coef = 0.0;
    double c_sign = -1.0;
  };

  Barrier(BarrierKind kind, BarrierParams params, Shape shape, ScalarField psi_lifted, ScalarField rho,
          ScalarField ell, OdeSolution ode, std::vector<char> mask, std::vector<char> ring);

  BarrierKind kind() const noexcept { return kind_; }
  const BarrierParams& params() const noexcept { return params_; }
  const Shape& shape() const noexcept { return shape_; }
  const OdeSolution& ode() const noexcept { return ode_; }
  double t_min() const noexcept { return params_.T0; }
  const TorusGrid& grid() const noexcept { return psi_.grid; }

  /// Nodes where the barrier is defined (all nodes for the exact barriers).
  const std::vector<char>& mask() const noexcept { return mask_; }
  /// Lateral part of the parabolic boundary (empty for the exact barriers).
  const std::vector<char>& ring() const noexcept { return ring_; }

  /// Barrier field at time t. With `masked`, nodes outside the mask hold NaN;
  /// otherwise the formula is evaluated everywhere (stencils at the mask edge
  /// read outside nodes). Throws ArgumentError for t < t_min().
  ScalarField value(double t, bool masked = true) const;
  ScalarField time_derivative(double t, bool masked = true) const;
  double value_at(double t, std::size_t node) const;

  /// sup over the mask of |barrier(t) - psi_lifted|.
  double offset_from_limit(double t) const;

 private:
  BarrierKind kind_;
  BarrierParams params_;
  Shape shape_;
  ScalarField psi_;
  ScalarField rho_;
  ScalarField ell_;
  OdeSolution ode_;
  std::vector<char> mask_;
  std::vector<char> ring_;
};

/// Checks A0 + D^2 rho >= 0 nodewise; throws HypothesisError naming the node otherwise.
void require_rho_admissible(const FlowProblem& problem, const ScalarField& rho);

/// u = (1 - e^{-t}) psi + e^{-t} rho - C e^{-t} + h(t) with C = sup(rho - phi0).
/// Requires the identity reaction (ModelError otherwise).
Barrier make_subsolution(const FlowProblem& problem, const ScalarField& psi_lifted,
                         const ScalarField& rho, const ScalarField& phi0);

/// Smallest e^B making the lower-order mixed terms of
/// det(lambda chi_psi + omega_SF) dominated by e^{B} C(n,kappa) e^psi f_mu,
/// times the safety factor 1.1. `weight` scales chi_psi (1 + eps A for the
/// approximate barrier, 1 otherwise).
double supersolution_exponent(const FlowProblem& problem, const ScalarField& psi_lifted,
                              const ScalarField& rho, double weight = 1.0);

/// v = (1 - e^{-t}) psi + e^{-t} rho + C e^{-t} + g(t) with C = sup(phi0 - rho).
/// When B is not given it is measured with supersolution_exponent.
/// Throws InternalError if B is not finite.
Barrier make_supersolution(const FlowProblem& problem, const ScalarField& psi_lifted,
                           const ScalarField& rho, const ScalarField& phi0,
                           std::optional<double> B = std::nullopt);

/// Flow data needed to fix the constants of the approximate barriers.
struct FlowBounds {
  double phi_inf = 0.0;  // uniform lower bound of the solution
  double phi_sup = 0.0;  // uniform upper bound of the solution
  /// Returns (t', phi_{t'}) for the first recorded slice with t' >= t.
  std::function<std::pair<double, ScalarField>(double)> slice_at_or_after;
};

struct ApproxBarrier {
  BarrierParams params;
  Barrier barrier;
};

/// u_eps = (1 - e^{-t} - eps) psi + e^{-t} rho + eps ell - C e^{-t} + h_eps(t)
/// on Omega_r x [T0, inf), h_eps(T0) = 0, h_eps' + h_eps = eps inf psi +
/// ln[(1 - e^{-t} - eps)^kappa - e^{B - t}].
/// Throws ArgumentError for eps <= 0, HypothesisError for eps >= 1/2 or
/// A_curv > 1.
ApproxBarrier make_approx_subsolution(const FlowProblem& problem, const DivisorModel& divisor,
                                      double epsilon, const ScalarField& psi_lifted,
                                      const ScalarField& rho, const FlowBounds& flow);

/// v_eps = (1 + eps A) psi + e^{-t} rho - eps ell + C e^{-t} + g_eps(t) on
/// Omega_r x [T0, inf), g_eps(0) = 0, g_eps' + g_eps = ln[(1 + eps A)^kappa +
/// e^{B - t}] - A eps inf psi.
ApproxBarrier make_approx_supersolution(const FlowProblem& problem, const DivisorModel& divisor,
                                        double epsilon, const ScalarField& psi_lifted,
                                        const ScalarField& rho, const FlowBounds& flow);

}  // namespace krf
