// SPDX-License-Identifier: Apache-2.0
#include "pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <limits>
#include <numbers>
#include <sstream>

#include "krf/barriers.hpp"
#include "krf/error.hpp"
#include "krf/flow.hpp"
#include "krf/io.hpp"
#include "krf/ode.hpp"
#include "krf/static_solver.hpp"
#include "krf/verification.hpp"

namespace krf::cli {

namespace {

constexpr double kLimitTime = 40.0;        // "t = infinity" for limit offsets
constexpr double kRateSlopeCeiling = -0.85;  // decay at least this fast against (1 + t) e^{-t}
constexpr double kIntegralExcessTol = 1e-3;
constexpr double kOdeTol = 1e-10;
constexpr double kIdentityFloor = 1e-9;
constexpr double kRegularEpsilon = 0.1;

std::string path_in(const Context& ctx, const std::string& a, const std::string& b = {}) {
  std::filesystem::path p = std::filesystem::path(ctx.dir) / a;
  if (!b.empty()) p /= b;
  return p.string();
}

void say(const Context& ctx, const std::string& line) {
  if (ctx.verbose) std::cerr << line << '\n';
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

SemiFlatField load_or_solve_semiflat(const Context& ctx) {
  const std::string dir = path_in(ctx, "semiflat");
  if (path_exists(path_in(ctx, "semiflat", "semiflat.json"))) return read_semiflat(dir);
  say(ctx, "semiflat: solving fiber problems");
  SemiFlatField sf = semiflat_solve(ctx.problem, ctx.config.solver.semiflat_tol);
  write_semiflat(dir, sf, ctx.hash);
  return sf;
}

StaticSolution load_or_solve_static(const Context& ctx, const SemiFlatField& sf) {
  const std::string dir = path_in(ctx, "static");
  if (path_exists(path_in(ctx, "static", "static.json"))) return read_static_solution(dir);
  say(ctx, "static: solving the base equation");
  const SolverSection& s = ctx.config.solver;
  StaticSolution st = solve_static(ctx.problem, s.method, s.tol, s.max_iter, &sf);
  write_static_solution(dir, st, ctx.hash);
  return st;
}

HessianStencil flow_stencil(const Context& ctx) {
  return ctx.config.flow.stencil == StencilScheme::kWide
             ? HessianStencil::wide(ctx.problem.grid, ctx.config.flow.stencil_radius)
             : HessianStencil::central();
}

ScalarField initial_data(const Context& ctx) {
  return sample_expression(ctx.problem.grid, ctx.config.flow.phi0);
}

FlowBounds bounds_from(const Trajectory& tr) {
  FlowBounds b;
  b.phi_inf = std::numeric_limits<double>::infinity();
  b.phi_sup = -std::numeric_limits<double>::infinity();
  for (const DiagnosticRow& r : tr.rows) {
    b.phi_inf = std::min(b.phi_inf, r.inf_phi);
    b.phi_sup = std::max(b.phi_sup, r.sup_phi);
  }
  b.slice_at_or_after = [&tr](double t) {
    const FlowState& s = tr.snapshot_at_or_after(t);
    return std::make_pair(s.t, s.phi);
  };
  return b;
}

struct NamedBarrier {
  std::string name;
  Barrier barrier;
};

/// Rebuilds every barrier from the stored artifacts. Approximate barriers need
/// the trajectory (for the uniform bounds and the T0 slice).
std::vector<NamedBarrier> build_barriers(const Context& ctx, const StaticSolution& st, const SemiFlatField& sf,
                                         const Trajectory* tr) {
  std::vector<NamedBarrier> out;
  const ScalarField phi0 = initial_data(ctx);
  out.push_back({"u", make_subsolution(ctx.problem, st.lifted, sf.rho, phi0)});
  out.push_back({"v", make_supersolution(ctx.problem, st.lifted, sf.rho, phi0)});
  if (!ctx.config.barrier.divisor || !tr) return out;
  const DivisorModel divisor =
      build_divisor_model(ctx.problem, sample_expression(ctx.problem.grid, *ctx.config.barrier.divisor));
  const FlowBounds bounds = bounds_from(*tr);
  for (double eps : ctx.config.barrier.epsilons) {
    const std::string tag = fmt("%g", eps);
    out.push_back({"u_eps_" + tag,
                   make_approx_subsolution(ctx.problem, divisor, eps, st.lifted, sf.rho, bounds).barrier});
    out.push_back({"v_eps_" + tag,
                   make_approx_supersolution(ctx.problem, divisor, eps, st.lifted, sf.rho, bounds).barrier});
  }
  return out;
}

std::vector<BarrierRecord> records_of(const std::vector<NamedBarrier>& barriers) {
  std::vector<BarrierRecord> out;
  for (const NamedBarrier& b : barriers) {
    out.push_back({b.name, b.barrier.kind(), b.barrier.params(), b.barrier.offset_from_limit(kLimitTime)});
  }
  return out;
}

bool same_params(const BarrierParams& a, const BarrierParams& b) {
  const auto close = [](double x, double y) { return std::abs(x - y) <= 1e-12 * (1.0 + std::abs(x) + std::abs(y)); };
  return close(a.C, b.C) && close(a.B, b.B) && close(a.epsilon, b.epsilon) && close(a.A, b.A) && close(a.r, b.r) &&
         close(a.T0, b.T0);
}

double sandwich_tolerance(const Context& ctx) {
  if (ctx.config.verify.sandwich_tol > 0.0) return ctx.config.verify.sandwich_tol;
  // Resolution study of the discrete log det on a field shaped like the A0
  // potential (or like the initial data when there is no potential).
  const ModelSpec& spec = ctx.config.model;
  std::string source = ctx.config.flow.phi0.source();
  if (spec.a0_potential) {
    source = fmt("%.17g", ctx.problem.normalization.a0_scale) + "*(" + spec.a0_potential->source() + ")";
  }
  const Expression field = Expression::parse(source);
  const int n = spec.points.front();
  std::vector<int> res;
  for (int m : {n / 2, n, 2 * n}) {
    if (m >= 4) res.push_back(m);
  }
  const CalibrationResult cal = calibrate_tolerance(
      [&spec](int m) {
        ModelSpec s = spec;
        s.points.assign(s.points.size(), m);
        return build_product_problem(s);
      },
      field, res);
  const double h = 2.0 * std::numbers::pi / n;
  return std::max(cal.tolerance(h), 1e-10);
}

std::vector<double> positive_snapshot_times(const Trajectory& tr, double from) {
  std::vector<double> out;
  for (const FlowState& s : tr.snapshots) {
    if (s.t > 0.0 && s.t >= from) out.push_back(s.t);
  }
  return out;
}

ComparisonReport scalar_report(const std::string& id, double magnitude, double tol) {
  ComparisonReport r;
  r.check_id = id;
  r.tolerance = tol;
  r.per_time.push_back({magnitude, 0, 0.0});
  r.finalize();
  return r;
}

ComparisonReport ode_report(const FlowProblem& problem, double B) {
  // Closed forms against the generic quadrature evaluator on [0, 30].
  const int kappa = problem.kappa();
  const OdeSolution h = barrier_h(kappa);
  const OdeSolution g = barrier_g(kappa, B);
  std::vector<double> times;
  for (int k = 1; k <= 1000; ++k) times.push_back(0.03 * k);
  const OdeSolution hq = solve_linear_reaction([&](double t) { return h.forcing(t); }, times);
  const OdeSolution gq = solve_linear_reaction([&](double t) { return g.forcing(t); }, times);
  double worst = 0.0;
  double sign = -std::numeric_limits<double>::infinity();
  for (double t : times) {
    worst = std::max({worst, std::abs(h(t) - hq(t)), std::abs(g(t) - gq(t))});
    sign = std::max({sign, h(t), -g(t)});
  }
  ComparisonReport r = scalar_report("ode", worst, kOdeTol);
  r.metadata["max_h_or_neg_g"] = sign;
  r.metadata["envelope_h"] = measured_envelope_constant(h, times);
  r.metadata["envelope_g"] = measured_envelope_constant(g, times);
  r.pass = r.pass && sign <= 0.0;
  return r;
}

void print_report(const Context& ctx, const ComparisonReport& r) {
  if (!ctx.log) return;
  *ctx.log << (r.pass ? "[PASS] " : "[FAIL] ") << r.check_id << ": worst=" << fmt("%.3e", r.worst.magnitude)
           << " tol=" << fmt("%.3e", r.tolerance) << '\n';
}

}  // namespace

Context make_context(const RunConfig& config, bool verbose, std::ostream& log) {
  Context ctx;
  ctx.config = config;
  ctx.hash = config_hash(config);
  ctx.dir = experiment_directory(config.output.dir, ctx.hash);
  ctx.problem = build_product_problem(config.model);
  ctx.verbose = verbose;
  ctx.log = &log;
  write_text(path_in(ctx, "config.ini"), config.canonical);
  return ctx;
}

int cmd_semiflat(const Context& ctx) {
  const SemiFlatField sf = semiflat_solve(ctx.problem, ctx.config.solver.semiflat_tol);
  write_semiflat(path_in(ctx, "semiflat"), sf, ctx.hash);
  *ctx.log << "semiflat: residual=" << fmt("%.3e", sf.max_residual) << " fiber mean=" << fmt("%.3e", sf.max_fiber_mean)
           << " -> " << path_in(ctx, "semiflat") << '\n';
  return 0;
}

int cmd_solve_static(const Context& ctx) {
  const SemiFlatField sf = load_or_solve_semiflat(ctx);
  const SolverSection& s = ctx.config.solver;
  const StaticSolution st = solve_static(ctx.problem, s.method, s.tol, s.max_iter, &sf);
  write_static_solution(path_in(ctx, "static"), st, ctx.hash);
  *ctx.log << "solve-static: residual=" << fmt("%.3e", st.final_residual)
           << " iterations=" << st.residual_history.size() << " -> " << path_in(ctx, "static") << '\n';
  return 0;
}

int cmd_run_flow(const Context& ctx) {
  const SemiFlatField sf = load_or_solve_semiflat(ctx);
  const StaticSolution st = load_or_solve_static(ctx, sf);
  const FlowSection& f = ctx.config.flow;
  RunOptions o;
  o.t_end = f.t_end;
  o.dt0 = f.dt0;
  o.dt_max = f.dt_max;
  o.snapshot_every = f.snapshot_every;
  o.step.scheme = f.scheme;
  o.step.stencil = flow_stencil(ctx);
  o.phi_inf = st.lifted;
  if (ctx.verbose) {
    o.observer = [&ctx](const FlowState& s) {
      if (s.step_index % 50 == 0) say(ctx, "run-flow: t=" + fmt("%.4f", s.t));
    };
  }
  Trajectory tr = run(ctx.problem, initial_data(ctx), o);
  integral_diagnostic(ctx.problem, tr);
  write_trajectory(path_in(ctx, "flow"), tr, ctx.hash);
  *ctx.log << "run-flow: " << tr.rows.size() << " rows, final t=" << fmt("%.6g", tr.final_state.t)
           << " dist_static=" << fmt("%.3e", tr.rows.back().dist_static) << " -> " << path_in(ctx, "flow") << '\n';
  return 0;
}

int cmd_barriers(const Context& ctx) {
  const SemiFlatField sf = read_semiflat(path_in(ctx, "semiflat"));
  const StaticSolution st = read_static_solution(path_in(ctx, "static"));
  std::optional<Trajectory> tr;
  if (ctx.config.barrier.divisor) tr = read_trajectory(path_in(ctx, "flow"));
  const std::vector<NamedBarrier> barriers = build_barriers(ctx, st, sf, tr ? &*tr : nullptr);
  const std::string dir = path_in(ctx, "barriers");
  make_directories(dir);
  write_barrier_records(path_in(ctx, "barriers", "barriers.json"), records_of(barriers), ctx.hash);
  const double t_field = std::max(ctx.config.flow.t_end, 0.0);
  for (const NamedBarrier& b : barriers) {
    const double t = std::max(t_field, b.barrier.t_min());
    write_field(path_in(ctx, "barriers", b.name + "_T.krf"), b.barrier.value(t), ctx.hash, {{"t", t}});
    *ctx.log << "barrier " << b.name << ": C=" << fmt("%.6g", b.barrier.params().C)
             << " B=" << fmt("%.6g", b.barrier.params().B) << " T0=" << fmt("%.4g", b.barrier.params().T0) << '\n';
  }
  return 0;
}

int cmd_verify(const Context& ctx) {
  const VerifySection& vs = ctx.config.verify;
  const Trajectory tr = read_trajectory(path_in(ctx, "flow"));
  const SemiFlatField sf = read_semiflat(path_in(ctx, "semiflat"));
  const StaticSolution st = read_static_solution(path_in(ctx, "static"));
  const std::string barrier_path = path_in(ctx, "barriers", "barriers.json");
  const std::vector<BarrierRecord> records = read_barrier_records(barrier_path);

  const std::vector<NamedBarrier> barriers = build_barriers(ctx, st, sf, &tr);
  // The stored parameters must describe the barriers this config produces.
  for (const NamedBarrier& b : barriers) {
    const auto it = std::find_if(records.begin(), records.end(), [&](const BarrierRecord& r) { return r.name == b.name; });
    if (it == records.end() || !same_params(it->params, b.barrier.params())) {
      throw DependencyError("barrier artifact '" + barrier_path + "' is stale or incomplete (" + b.name +
                            "); rerun the barriers command");
    }
  }
  const Barrier& u = barriers[0].barrier;
  const Barrier& v = barriers[1].barrier;

  std::vector<ComparisonReport> reports;
  double tol = 0.0;
  if (vs.checks.empty() || ctx.config.wants("sandwich") || ctx.config.wants("classify") || ctx.config.wants("approx")) {
    tol = sandwich_tolerance(ctx);
    say(ctx, "verify: discretization tolerance " + fmt("%.3e", tol));
  }
  if (ctx.config.wants("sandwich")) reports.push_back(sandwich_check(tr, u, v, tol));
  if (ctx.config.wants("classify")) {
    const std::vector<double> times = positive_snapshot_times(tr, 0.0);
    ComparisonReport a = classify_viscosity(ctx.problem, u, times, tol);
    a.check_id = "classify_sub";
    ComparisonReport b = classify_viscosity(ctx.problem, v, times, tol);
    b.check_id = "classify_super";
    reports.push_back(std::move(a));
    reports.push_back(std::move(b));
  }
  if (ctx.config.wants("rate")) {
    const RateFit fit = convergence_rate_fit(tr, vs.rate_window_start, vs.rate_window_end);
    ComparisonReport r = scalar_report("rate", fit.slope_fit - kRateSlopeCeiling, 0.0);
    r.metadata["slope_fit"] = fit.slope_fit;
    r.metadata["plain_slope"] = fit.plain_slope;
    r.metadata["c_fit"] = fit.c_fit;
    r.metadata["window_start"] = fit.window_start;
    r.metadata["window_end"] = fit.window_end;
    r.metadata["points"] = static_cast<double>(fit.points);
    r.notes = fit.warnings;
    reports.push_back(std::move(r));
  }
  if (ctx.config.wants("bounds")) {
    Trajectory copy = tr;
    const UniformBoundsReport b = uniform_bounds_check(ctx.problem, copy, st.lifted.sup(), st.lifted.inf(),
                                                       vs.rate_window_start, kIntegralExcessTol);
    ComparisonReport r = scalar_report("bounds", b.max_excess, kIntegralExcessTol);
    r.metadata["sup_early"] = b.sup_early;
    r.metadata["sup_late"] = b.sup_late;
    r.metadata["inf_early"] = b.inf_early;
    r.metadata["inf_late"] = b.inf_late;
    r.metadata["max_sup"] = b.max_sup;
    r.metadata["min_inf"] = b.min_inf;
    r.pass = r.pass && b.bounded && b.integral_ok;
    reports.push_back(std::move(r));
  }
  if (ctx.config.wants("semiflat")) {
    const double defect = semiflat_identity_defect(ctx.problem, st.lifted, sf.rho).sup();
    ComparisonReport r =
        scalar_report("semiflat", defect, std::max(kIdentityFloor, 100.0 * ctx.config.solver.tol));
    r.metadata["semiflat_residual"] = sf.max_residual;
    r.metadata["fiber_mean"] = sf.max_fiber_mean;
    reports.push_back(std::move(r));
  }
  if (ctx.config.wants("static")) {
    reports.push_back(scalar_report("static", st.final_residual, ctx.config.solver.tol * (1.0 + 1e-9)));
  }
  if (ctx.config.wants("ode")) reports.push_back(ode_report(ctx.problem, v.params().B));
  if (ctx.config.wants("comparison")) {
    say(ctx, "verify: comparison stress with " + std::to_string(vs.comparison_pairs) + " pairs");
    reports.push_back(discrete_comparison_stress(ctx.problem, vs.comparison_pairs, vs.seed));
  }
  if (ctx.config.wants("approx")) {
    if (!ctx.config.barrier.divisor) throw ConfigurationError("check 'approx' needs barrier.divisor");
    for (std::size_t k = 2; k < barriers.size(); ++k) {
      const Barrier& b = barriers[k].barrier;
      ComparisonReport r =
          classify_viscosity(ctx.problem, b, positive_snapshot_times(tr, b.t_min()), tol);
      r.check_id = "approx_" + barriers[k].name;
      reports.push_back(std::move(r));
    }
  }
  if (ctx.config.wants("regular")) {
    const RegularityCertificate c = check_regular_family(ctx.problem, kRegularEpsilon, ctx.config.flow.t_end, 41);
    ComparisonReport r = scalar_report("regular", c.e_of_epsilon, std::numeric_limits<double>::max());
    r.metadata["epsilon"] = c.epsilon;
    r.metadata["floor_scale"] = c.floor_scale;
    r.pass = r.pass && c.floor_ok && std::isfinite(c.e_of_epsilon);
    reports.push_back(std::move(r));
  }

  const std::string out = path_in(ctx, "verify");
  make_directories(out);
  write_reports(path_in(ctx, "verify", "reports.json"), reports, ctx.hash);
  bool ok = true;
  for (const ComparisonReport& r : reports) {
    print_report(ctx, r);
    ok = ok && r.pass;
  }
  return ok ? 0 : 1;
}

int cmd_report(const Context& ctx) {
  const std::vector<DiagnosticRow> rows = read_trajectory_csv(path_in(ctx, "flow", "trajectory.csv"));
  const std::string dir = path_in(ctx, "report");
  make_directories(dir);
  const std::vector<std::string>& formats = ctx.config.output.formats;
  const auto wants = [&](const char* f) { return std::find(formats.begin(), formats.end(), f) != formats.end(); };

  std::vector<BarrierRecord> records;
  if (path_exists(path_in(ctx, "barriers", "barriers.json"))) {
    records = read_barrier_records(path_in(ctx, "barriers", "barriers.json"));
  }
  double B = std::numeric_limits<double>::quiet_NaN();
  for (const BarrierRecord& r : records) {
    if (r.name == "v") B = r.params.B;
  }
  const OdeSolution h = barrier_h(ctx.problem.kappa());
  std::optional<OdeSolution> g;
  if (std::isfinite(B)) g = barrier_g(ctx.problem.kappa(), B);

  if (wants("csv")) {
    // t, sup/inf of phi, distance to the static solution, its reference
    // envelope d(0) (1 + t) e^{-t}, and the barrier ODE solutions h and g.
    std::ostringstream csv;
    csv << "t,sup_phi,inf_phi,dist_static,envelope,h,g\n";
    const double d0 = rows.empty() ? 0.0 : rows.front().dist_static;
    for (const DiagnosticRow& r : rows) {
      char line[256];
      std::snprintf(line, sizeof line, "%.16e,%.16e,%.16e,%.16e,%.16e,%.16e,%.16e\n", r.t, r.sup_phi, r.inf_phi,
                    r.dist_static, d0 * (1.0 + r.t) * std::exp(-r.t), h(r.t),
                    g ? (*g)(r.t) : std::numeric_limits<double>::quiet_NaN());
      csv << line;
    }
    write_text(path_in(ctx, "report", "plot_data.csv"), csv.str());
    std::ostringstream bp;
    bp << "name,kind,C,B,epsilon,A,r,T0,limit_offset\n";
    for (const BarrierRecord& r : records) {
      char line[512];
      std::snprintf(line, sizeof line, "%s,%s,%.16e,%.16e,%.16e,%.16e,%.16e,%.16e,%.16e\n", r.name.c_str(),
                    r.kind == BarrierKind::kSub ? "sub" : "super", r.params.C, r.params.B, r.params.epsilon,
                    r.params.A, r.params.r, r.params.T0, r.limit_offset);
      bp << line;
    }
    write_text(path_in(ctx, "report", "barrier_params.csv"), bp.str());
  }
  if (wants("json")) {
    std::vector<ComparisonReport> reports;
    if (path_exists(path_in(ctx, "verify", "reports.json"))) reports = read_reports(path_in(ctx, "verify", "reports.json"));
    write_reports(path_in(ctx, "report", "summary.json"), reports, ctx.hash);
  }
  *ctx.log << "report: " << rows.size() << " rows -> " << dir << '\n';
  return 0;
}

}  // namespace krf::cli
