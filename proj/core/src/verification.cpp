// SPDX-License-Identifier: Apache-2.0
#include "krf/verification.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "krf/error.hpp"
#include "krf/parallel.hpp"

namespace krf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kDistFloor = 1e-13;

Violation worst_of(const std::vector<double>& magnitude, const std::vector<char>& mask, double t) {
  Violation v{-kInf, 0, t};
  for (std::size_t i = 0; i < magnitude.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    if (magnitude[i] > v.magnitude) v = {magnitude[i], i, t};
  }
  return v;
}

std::vector<char> intersect(const std::vector<char>& a, const std::vector<char>& b) {
  std::vector<char> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] && b[i];
  return out;
}

void add_grid_metadata(ComparisonReport& rep, const TorusGrid& g) {
  rep.metadata["n_dims"] = g.n_dims();
  rep.metadata["kappa"] = g.base_dims();
  for (int d = 0; d < g.n_dims(); ++d) rep.metadata["points_" + std::to_string(d)] = g.points_per_dim()[static_cast<std::size_t>(d)];
}

std::pair<double, double> least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
  }
  const double mx = sx / n;
  const double my = sy / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

}  // namespace

void ComparisonReport::finalize() {
  worst = Violation{-kInf, 0, 0.0};
  for (const Violation& v : per_time) {
    if (v.magnitude > worst.magnitude) worst = v;
  }
  pass = !per_time.empty() && worst.magnitude <= tolerance;
}

ComparisonReport sandwich_check(const Trajectory& trajectory, const Barrier& u, const Barrier& v, double tol) {
  if (!(u.grid() == v.grid())) throw ArgumentError("sandwich_check: barriers live on different grids");
  if (trajectory.snapshots.empty() || !(trajectory.snapshots.front().phi.grid == u.grid())) {
    throw ArgumentError("sandwich_check: trajectory and barriers live on different grids");
  }
  const double t0 = std::max(u.t_min(), v.t_min());
  const std::vector<char> mask = intersect(u.mask(), v.mask());

  ComparisonReport rep;
  rep.check_id = "sandwich";
  rep.tolerance = tol;
  add_grid_metadata(rep, u.grid());
  rep.metadata["t_start"] = t0;
  const bool same_shape = u.shape().a_const == v.shape().a_const && u.shape().a_decay == v.shape().a_decay &&
                          u.shape().ell_coef == 0.0 && v.shape().ell_coef == 0.0;
  double envelope_excess = -kInf;
  for (const FlowState& s : trajectory.snapshots) {
    if (s.t < t0 - 1e-12) continue;
    const double t = std::max(s.t, t0);
    const ScalarField lo = u.value(t);
    const ScalarField hi = v.value(t);
    std::vector<double> mag(lo.size(), -kInf);
    for (std::size_t i = 0; i < mag.size(); ++i) {
      if (mask[i]) mag[i] = std::max(lo[i] - s.phi[i], s.phi[i] - hi[i]);
    }
    rep.per_time.push_back(worst_of(mag, mask, s.t));
    if (same_shape) {
      // For barriers sharing the psi and rho terms the gap is exactly
      // (C_u + C_v) e^{-t} + y_v(t) - y_u(t).
      const double env = (u.params().C + v.params().C) * std::exp(-t) + v.ode()(t) - u.ode()(t);
      for (std::size_t i = 0; i < mag.size(); ++i) {
        if (mask[i]) envelope_excess = std::max(envelope_excess, (hi[i] - lo[i]) - env);
      }
    }
  }
  if (rep.per_time.empty()) throw ArgumentError("sandwich_check: trajectory does not reach the barrier time range");
  if (same_shape) rep.metadata["envelope_excess"] = envelope_excess;
  rep.finalize();
  return rep;
}

ComparisonReport barrier_side_check(const Trajectory& trajectory, const Barrier& barrier, double tol,
                                    const std::vector<char>& nodes) {
  const std::vector<char> mask = nodes.empty() ? barrier.mask() : intersect(barrier.mask(), nodes);
  ComparisonReport rep;
  rep.check_id = barrier.kind() == BarrierKind::kSub ? "sub_below_flow" : "super_above_flow";
  rep.tolerance = tol;
  add_grid_metadata(rep, barrier.grid());
  for (const FlowState& s : trajectory.snapshots) {
    if (s.t < barrier.t_min() - 1e-12) continue;
    const ScalarField b = barrier.value(std::max(s.t, barrier.t_min()));
    std::vector<double> mag(b.size(), -kInf);
    for (std::size_t i = 0; i < mag.size(); ++i) {
      if (!mask[i]) continue;
      mag[i] = barrier.kind() == BarrierKind::kSub ? b[i] - s.phi[i] : s.phi[i] - b[i];
    }
    rep.per_time.push_back(worst_of(mag, mask, s.t));
  }
  if (rep.per_time.empty()) throw ArgumentError("barrier_side_check: no snapshot in the barrier time range");
  rep.finalize();
  return rep;
}

ComparisonReport classify_viscosity(const FlowProblem& problem, const Barrier& barrier,
                                    const std::vector<double>& times, double tol, const HessianStencil& stencil) {
  if (!(barrier.grid() == problem.grid)) throw ArgumentError("classify_viscosity: grid mismatch");
  ComparisonReport rep;
  const bool sub = barrier.kind() == BarrierKind::kSub;
  rep.check_id = sub ? "classify_sub" : "classify_super";
  rep.tolerance = tol;
  add_grid_metadata(rep, problem.grid);
  rep.metadata["epsilon"] = barrier.params().epsilon;
  rep.metadata["r"] = barrier.params().r;
  rep.metadata["T0"] = barrier.params().T0;
  std::size_t sampled = 0;
  for (double t : times) {
    if (t < barrier.t_min()) continue;
    ++sampled;
    const ScalarField value = barrier.value(t, false);
    const ScalarField dot = barrier.time_derivative(t, false);
    ResidualOptions opt;
    opt.tol = tol;
    const ResidualField r = residual(problem, t, value, dot, stencil, opt);
    std::vector<double> mag(r.r.size());
    for (std::size_t i = 0; i < mag.size(); ++i) {
      mag[i] = sub ? (r.admissible[i] ? -r.r[i] : kInf) : r.r[i];
    }
    rep.per_time.push_back(worst_of(mag, barrier.mask(), t));
  }
  rep.metadata["sampled_times"] = static_cast<double>(sampled);
  if (sampled == 0) rep.notes.push_back("no sampled time at or after T0");
  rep.finalize();
  return rep;
}

RateFit convergence_rate_fit(const Trajectory& trajectory, double t_start, double t_end) {
  if (!(t_end > t_start)) throw ArgumentError("convergence_rate_fit: empty time window");
  RateFit fit;
  fit.window_start = t_start;
  fit.window_end = t_end;
  std::vector<double> ts, d;
  for (const DiagnosticRow& row : trajectory.rows) {
    if (row.t < t_start - 1e-12 || row.t > t_end + 1e-12) continue;
    if (std::isnan(row.dist_static)) throw ArgumentError("convergence_rate_fit: trajectory has no dist_static");
    if (row.dist_static <= kDistFloor) {
      fit.window_end = row.t;
      fit.warnings.push_back("distance reached the numerical floor at t = " + std::to_string(row.t) +
                             "; window shortened");
      break;
    }
    ts.push_back(row.t);
    d.push_back(row.dist_static);
  }
  if (ts.size() < 2) throw ArgumentError("convergence_rate_fit: fewer than 2 usable samples in the window");
  fit.points = ts.size();
  std::vector<double> y_env(ts.size()), y_plain(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) {
    y_plain[i] = std::log(d[i]);
    y_env[i] = y_plain[i] - std::log1p(ts[i]);
  }
  const auto [slope, intercept] = least_squares(ts, y_env);
  fit.slope_fit = slope;
  fit.c_fit = std::exp(intercept);
  fit.plain_slope = least_squares(ts, y_plain).first;
  fit.monotone_after_transient = true;
  for (std::size_t i = 1; i < d.size(); ++i) {
    if (d[i] > d[i - 1] * (1.0 + 1e-12)) fit.monotone_after_transient = false;
  }
  return fit;
}

ScalarField sample_expression(const TorusGrid& grid, const Expression& e, double t) {
  return sample_field(grid, [&](std::span<const double> y) { return e(y, t); });
}

namespace {

struct PairData {
  ScalarField lower;
  ScalarField upper;
};

PairData random_pair(const FlowProblem& problem, std::mt19937_64& rng, const StressOptions& options) {
  const TorusGrid& g = problem.grid;
  const int n = g.n_dims();
  double lambda_min = kInf;
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    lambda_min = std::min(lambda_min, symmetric_eigenvalues(problem.a0.at(i))(0));
  }
  const double amp = options.amplitude * lambda_min;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> freq(-2, 2);

  constexpr int kModes = 3;
  struct Mode {
    std::array<int, kMaxDims> k{};
    double a = 0.0;
    double phase = 0.0;
  };
  std::vector<Mode> modes;
  for (int m = 0; m < kModes; ++m) {
    Mode mode;
    int k2 = 0;
    while (k2 == 0) {
      k2 = 0;
      for (int d = 0; d < n; ++d) {
        mode.k[static_cast<std::size_t>(d)] = freq(rng);
        k2 += mode.k[static_cast<std::size_t>(d)] * mode.k[static_cast<std::size_t>(d)];
      }
    }
    mode.a = amp * (2.0 * unit(rng) - 1.0) / (kModes * k2);
    mode.phase = 2.0 * std::numbers::pi * unit(rng);
    modes.push_back(mode);
  }
  std::array<double, kMaxDims> center{};
  for (int d = 0; d < n; ++d) center[static_cast<std::size_t>(d)] = 2.0 * std::numbers::pi * unit(rng);
  const double bump_amp = options.zero_bump ? 0.0 : amp * unit(rng) / n;

  PairData out;
  out.lower = sample_field(g, [&](std::span<const double> y) {
    double v = 0.0;
    for (const Mode& m : modes) {
      double arg = m.phase;
      for (int d = 0; d < n; ++d) arg += m.k[static_cast<std::size_t>(d)] * y[static_cast<std::size_t>(d)];
      v += m.a * std::cos(arg);
    }
    return v;
  });
  const ScalarField bump = sample_field(g, [&](std::span<const double> y) {
    double v = 1.0;
    for (int d = 0; d < n; ++d) v *= 0.5 * (1.0 + std::cos(y[static_cast<std::size_t>(d)] - center[static_cast<std::size_t>(d)]));
    return bump_amp * v;
  });
  out.upper = out.lower;
  for (std::size_t i = 0; i < out.upper.size(); ++i) out.upper[i] += bump[i];
  return out;
}

struct CrossingStats {
  long crossings = 0;
  double worst = -kInf;
  std::size_t node = 0;
  double t = 0.0;
};

// Runs both fields in lockstep with the same dt and records lower > upper events.
CrossingStats lockstep(const FlowProblem& problem, const PairData& pair, const HessianStencil& stencil,
                       double dt, int steps) {
  StepOptions so;
  so.scheme = TimeScheme::kExplicit;
  so.stencil = stencil;
  FlowStepper a(problem, so);
  FlowStepper b(problem, so);
  FlowState lo = initial_state(problem, pair.lower, stencil);
  FlowState hi = initial_state(problem, pair.upper, stencil);
  CrossingStats stats;
  for (int k = 0; k < steps; ++k) {
    StepResult ra = a.step(lo, dt);
    StepResult rb = b.step(hi, dt);
    if (ra.halvings > 0 || rb.halvings > 0) {
      throw StabilityError("comparison stress: shared step size could not be kept", 0, lo.t);
    }
    lo = std::move(ra.state);
    hi = std::move(rb.state);
    for (std::size_t i = 0; i < lo.phi.size(); ++i) {
      const double gap = lo.phi[i] - hi.phi[i];
      if (gap > 1e-12 * (1.0 + std::abs(hi.phi[i]))) ++stats.crossings;
      if (gap > stats.worst) stats = {stats.crossings, gap, i, lo.t};
    }
  }
  return stats;
}

}  // namespace

ComparisonReport discrete_comparison_stress(const FlowProblem& problem, int pair_count, std::uint64_t seed,
                                            const StressOptions& options) {
  if (pair_count < 1) throw ArgumentError("discrete_comparison_stress: pair_count must be >= 1");
  if (!(options.t_end > 0.0)) throw ArgumentError("discrete_comparison_stress: t_end must be > 0");
  std::mt19937_64 rng(seed);
  const HessianStencil wide = HessianStencil::wide(problem.grid, options.radius);
  const HessianStencil central = HessianStencil::central();

  ComparisonReport rep;
  rep.check_id = "comparison_stress";
  rep.tolerance = 0.0;
  add_grid_metadata(rep, problem.grid);
  rep.metadata["pairs"] = pair_count;
  rep.metadata["seed"] = static_cast<double>(seed);
  rep.metadata["t_end"] = options.t_end;

  long wide_crossings = 0;
  long central_crossings = 0;
  double central_worst = -kInf;
  double min_dt = kInf;
  for (int p = 0; p < pair_count; ++p) {
    const PairData pair = random_pair(problem, rng, options);
    double dt = kInf;
    for (const ScalarField* f : {&pair.lower, &pair.upper}) {
      for (double t : {0.0, options.t_end}) dt = std::min(dt, explicit_monotone_dt(problem, t, *f, wide));
    }
    dt *= options.dt_safety;
    const int steps = static_cast<int>(std::ceil(options.t_end / dt));
    dt = options.t_end / steps;
    min_dt = std::min(min_dt, dt);

    const CrossingStats w = lockstep(problem, pair, wide, dt, steps);
    wide_crossings += w.crossings;
    // Ordering is required up to the 1e-12 relative rounding allowance.
    rep.per_time.push_back({w.crossings > 0 ? std::max(w.worst, 0.0) : std::min(w.worst, 0.0), w.node, w.t});
    if (options.central_report) {
      try {
        const CrossingStats c = lockstep(problem, pair, central, dt, steps);
        central_crossings += c.crossings;
        central_worst = std::max(central_worst, c.worst);
      } catch (const Error& e) {
        rep.notes.push_back(std::string("central run stopped: ") + e.what());
      }
    }
  }
  rep.metadata["wide_crossings"] = static_cast<double>(wide_crossings);
  rep.metadata["min_dt"] = min_dt;
  if (options.central_report) {
    rep.metadata["central_crossings"] = static_cast<double>(central_crossings);
    rep.metadata["central_worst_gap"] = central_worst;
  }
  rep.finalize();
  rep.pass = wide_crossings == 0;
  return rep;
}

UniformBoundsReport uniform_bounds_check(const FlowProblem& problem, Trajectory& trajectory, double sup_ref,
                                         double inf_ref, double transient_end, double excess_tol) {
  UniformBoundsReport rep;
  rep.transient_end = transient_end;
  rep.max_sup = -kInf;
  rep.min_inf = kInf;
  for (const DiagnosticRow& row : trajectory.rows) {
    const double ds = std::abs(row.sup_phi - sup_ref);
    const double di = std::abs(row.inf_phi - inf_ref);
    if (row.t <= transient_end) {
      rep.sup_early = std::max(rep.sup_early, ds);
      rep.inf_early = std::max(rep.inf_early, di);
    } else {
      rep.sup_late = std::max(rep.sup_late, ds);
      rep.inf_late = std::max(rep.inf_late, di);
    }
    rep.max_sup = std::max(rep.max_sup, row.sup_phi);
    rep.min_inf = std::min(rep.min_inf, row.inf_phi);
  }
  const IntegralReport integral = integral_diagnostic(problem, trajectory);
  rep.max_excess = integral.max_excess;
  rep.bounded = std::isfinite(rep.max_sup) && std::isfinite(rep.min_inf) && rep.sup_late <= rep.sup_early &&
                rep.inf_late <= rep.inf_early;
  rep.integral_ok = rep.max_excess <= excess_tol;
  return rep;
}

CalibrationResult calibrate_tolerance(const std::function<FlowProblem(int)>& make_problem_at,
                                      const Expression& phi, const std::vector<int>& resolutions) {
  if (resolutions.empty()) throw ArgumentError("calibrate_tolerance: need at least one resolution");
  CalibrationResult out;
  std::vector<std::vector<Expression>> hess;
  for (int N : resolutions) {
    const FlowProblem p = make_problem_at(N);
    const int n = p.n();
    if (hess.empty()) {
      hess.assign(static_cast<std::size_t>(n), std::vector<Expression>(static_cast<std::size_t>(n)));
      for (int i = 0; i < n; ++i) {
        const Expression di = phi.derivative(i);
        for (int j = 0; j < n; ++j) hess[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = di.derivative(j);
      }
    }
    const ScalarField field = sample_expression(p.grid, phi);
    std::vector<double> err(p.grid.node_count());
    parallel_for(err.size(), [&](std::size_t node) {
      double y[kMaxDims];
      for (int d = 0; d < n; ++d) y[d] = p.grid.coordinate(node, d);
      const std::span<const double> ys(y, static_cast<std::size_t>(n));
      SmallMatrix exact = p.a0.at(node);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) exact(i, j) += hess[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)](ys);
      const SmallMatrix discrete = p.a0.at(node) + central_hessian_at(field, node);
      err[node] = std::abs(std::log(discrete.determinant()) - std::log(exact.determinant()));
    });
    double h = 0.0;
    for (double s : p.grid.spacing()) h = std::max(h, s);
    const double e = *std::max_element(err.begin(), err.end());
    out.resolutions.push_back(N);
    out.spacings.push_back(h);
    out.errors.push_back(e);
    out.constant = std::max(out.constant, e / (h * h));
  }
  return out;
}

}  // namespace krf
