// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "krf/barriers.hpp"
#include "krf/flow.hpp"

namespace krf {

struct Violation {
  double magnitude = 0.0;  // positive means the check is violated by this much before tolerance
  std::size_t node = 0;
  double t = 0.0;
};

/// fail <=> worst.magnitude > tolerance.
struct ComparisonReport {
  std::string check_id;
  std::vector<Violation> per_time;  // worst violation at each sampled time
  Violation worst;
  double tolerance = 0.0;
  bool pass = false;
  std::map<std::string, double> metadata;
  std::vector<std::string> notes;

  void finalize();
};

/// u(t) - tol <= phi_t <= v(t) + tol at every node inside both masks and
/// every trajectory snapshot with t >= max(u.t_min, v.t_min). The violation
/// magnitude is max(u - phi, phi - v). Throws ArgumentError when no snapshot
/// lies in the barriers' time range or grids differ.
ComparisonReport sandwich_check(const Trajectory& trajectory, const Barrier& u, const Barrier& v, double tol);

/// One-sided version for a single barrier (sub: u <= phi, super: phi <= v).
ComparisonReport barrier_side_check(const Trajectory& trajectory, const Barrier& barrier, double tol,
                                    const std::vector<char>& nodes = {});

/// Evaluates the residual with the barrier's exact time derivative at the
/// given times. A subsolution needs sub_ok at every in-mask node (magnitude
/// max(-r), +inf at inadmissible nodes), a supersolution super_ok (magnitude
/// max r). Times below the barrier's T0 are skipped.
ComparisonReport classify_viscosity(const FlowProblem& problem, const Barrier& barrier,
                                    const std::vector<double>& times, double tol,
                                    const HessianStencil& stencil = HessianStencil::central());

struct RateFit {
  double c_fit = 0.0;
  double slope_fit = 0.0;    // slope of log dist - log(1 + t) against t
  double plain_slope = 0.0;  // slope of log dist against t
  double window_start = 0.0;
  double window_end = 0.0;
  std::size_t points = 0;
  bool monotone_after_transient = false;
  std::vector<std::string> warnings;
};

/// Least squares over rows with t in [t_start, t_end]. The window is cut
/// where dist_static reaches the numerical floor 1e-13 (with a warning).
/// Throws ArgumentError for an empty window, missing dist_static, or fewer
/// than 2 usable points.
RateFit convergence_rate_fit(const Trajectory& trajectory, double t_start, double t_end);

struct StressOptions {
  double t_end = 0.2;
  int radius = 1;
  double dt_safety = 0.5;
  /// Amplitude of the random initial data relative to the smallest eigenvalue of A0.
  double amplitude = 0.1;
  bool central_report = true;
  /// Nonnegative bump of zero amplitude (identical runs).
  bool zero_bump = false;
};

/// Seeded ordered pairs phi0 <= psi0 = phi0 + bump run in lockstep with the
/// explicit wide-stencil scheme and a shared monotone step size; counts
/// nodewise crossings phi_t > psi_t. Central-difference crossings are
/// reported in the metadata without affecting pass/fail.
ComparisonReport discrete_comparison_stress(const FlowProblem& problem, int pair_count, std::uint64_t seed,
                                            const StressOptions& options = {});

struct UniformBoundsReport {
  double transient_end = 0.0;
  double sup_early = 0.0;   // max |sup phi_t - sup_ref| for t <= transient_end
  double sup_late = 0.0;    // same after the transient
  double inf_early = 0.0;
  double inf_late = 0.0;
  double max_sup = 0.0;
  double min_inf = 0.0;
  double max_excess = 0.0;  // of (I' + I) - B(t)
  bool bounded = false;
  bool integral_ok = false;
};

/// Bounded means the late drift of sup and inf from the reference values does
/// not exceed the early (transient) drift.
UniformBoundsReport uniform_bounds_check(const FlowProblem& problem, Trajectory& trajectory, double sup_ref,
                                         double inf_ref, double transient_end, double excess_tol = 1e-3);

struct CalibrationResult {
  std::vector<int> resolutions;
  std::vector<double> spacings;
  std::vector<double> errors;
  double constant = 0.0;  // K with error <= K h^2
  double factor = 10.0;

  double tolerance(double h) const { return factor * constant * h * h; }
};

/// Resolution study of the discrete log Monge-Ampere density of phi against
/// its closed-form value (analytic Hessian) at t = 0: error(h) =
/// sup |log det(A0 + D_h^2 phi) - log det(A0 + D^2 phi)|, K = max error / h^2.
/// `make_problem_at(N)` builds the geometry with N points per axis.
CalibrationResult calibrate_tolerance(const std::function<FlowProblem(int)>& make_problem_at,
                                      const Expression& phi, const std::vector<int>& resolutions);

/// Samples an expression on a grid.
ScalarField sample_expression(const TorusGrid& grid, const Expression& e, double t = 0.0);

}  // namespace krf
