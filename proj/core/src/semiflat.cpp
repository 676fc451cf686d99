// SPDX-License-Identifier: Apache-2.0
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <string>

#include "krf/error.hpp"
#include "krf/geometry.hpp"
#include "krf/ma_operator.hpp"
#include "krf/parallel.hpp"

namespace krf {

namespace {

struct FiberResult {
  std::vector<double> rho;
  double constant = 1.0;
  double residual = 0.0;
  double mean = 0.0;
  int iterations = 0;
};

double max_relative_residual(const std::vector<double>& log_det, double log_c) {
  double worst = 0.0;
  for (double v : log_det) worst = std::max(worst, std::abs(std::expm1(v - log_c)));
  return worst;
}

double field_mean(const std::vector<double>& v) {
  return compensated_sum(v) / static_cast<double>(v.size());
}

FiberResult solve_fiber(const FlowProblem& problem, const TorusGrid& fiber_grid, std::size_t base,
                        double tol, int max_iter) {
  const int kappa = problem.kappa();
  const int m = fiber_grid.n_dims();
  const std::size_t count = fiber_grid.node_count();

  MetricField theta(fiber_grid);
  for (std::size_t f = 0; f < count; ++f) {
    const SmallMatrix a = problem.a0.at(problem.grid.compose(base, f));
    theta.set(f, a.block(kappa, kappa, m, m));
  }

  ScalarField rho(fiber_grid);
  std::vector<double> log_det = log_det_field(theta, rho);
  double log_c = field_mean(log_det);
  std::vector<double> history{max_relative_residual(log_det, log_c)};

  const auto nn = static_cast<Eigen::Index>(count);
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  bool analyzed = false;
  int it = 0;
  while (history.back() > tol || std::abs(field_mean(rho.values)) > 1e-13) {
    if (it >= max_iter) {
      throw SolverError("semiflat_solve: Newton did not converge on fiber over base node " +
                            std::to_string(base),
                        history);
    }
    ++it;
    const LogDetLinearization lin = linearize_log_det(theta, rho);

    // Bordered system: J d_rho - d_s = -(log det - s), mean(d_rho) = -mean(rho).
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(lin.jacobian.nonZeros()) + 2 * count);
    for (Eigen::Index k = 0; k < lin.jacobian.outerSize(); ++k) {
      for (Eigen::SparseMatrix<double>::InnerIterator e(lin.jacobian, k); e; ++e) {
        trip.emplace_back(static_cast<int>(e.row()), static_cast<int>(e.col()), e.value());
      }
    }
    const double inv_n = 1.0 / static_cast<double>(count);
    for (Eigen::Index i = 0; i < nn; ++i) {
      trip.emplace_back(static_cast<int>(i), static_cast<int>(nn), -1.0);
      trip.emplace_back(static_cast<int>(nn), static_cast<int>(i), inv_n);
    }
    Eigen::SparseMatrix<double> sys(nn + 1, nn + 1);
    sys.setFromTriplets(trip.begin(), trip.end());
    sys.makeCompressed();
    if (!analyzed) {
      lu.analyzePattern(sys);
      analyzed = true;
    }
    lu.factorize(sys);
    if (lu.info() != Eigen::Success) {
      throw SolverError("semiflat_solve: singular Newton system over base node " + std::to_string(base),
                        history);
    }
    Eigen::VectorXd rhs(nn + 1);
    for (Eigen::Index i = 0; i < nn; ++i) rhs(i) = -(lin.log_det[static_cast<std::size_t>(i)] - log_c);
    rhs(nn) = -field_mean(rho.values);
    const Eigen::VectorXd delta = lu.solve(rhs);

    double step = 1.0;
    for (;;) {
      ScalarField trial = rho;
      for (std::size_t i = 0; i < count; ++i) trial[i] += step * delta(static_cast<Eigen::Index>(i));
      try {
        const std::vector<double> ld = log_det_field(theta, trial);
        const double lc = log_c + step * delta(nn);
        const double res = max_relative_residual(ld, lc);
        if (res < history.back() || step < 1e-3 || res <= tol) {
          rho = std::move(trial);
          log_det = ld;
          log_c = lc;
          history.push_back(res);
          break;
        }
      } catch (const AdmissibilityError&) {
      }
      step *= 0.5;
      if (step < 1e-6) {
        throw SolverError("semiflat_solve: no admissible damping step over base node " +
                              std::to_string(base),
                          history);
      }
    }
  }

  FiberResult out;
  out.rho = std::move(rho.values);
  out.constant = std::exp(log_c);
  out.residual = history.back();
  out.mean = std::abs(field_mean(out.rho));
  out.iterations = it;
  return out;
}

}  // namespace

SemiFlatField semiflat_solve(const FlowProblem& problem, double tol, int max_iter) {
  if (!(tol >= kMinSemiflatTolerance)) {
    throw SolverError("semiflat_solve: tolerance below the reachable minimum 1e-14");
  }
  if (max_iter < 1) throw ArgumentError("semiflat_solve: max_iter must be >= 1");

  SemiFlatField out;
  out.rho = ScalarField(problem.grid);
  const std::size_t bases = problem.grid.base_count();
  if (problem.grid.fiber_dims() == 0) {
    out.fiber_constants.assign(bases, 1.0);
    return out;
  }

  const TorusGrid fiber_grid = problem.grid.fiber_grid();
  const std::size_t fibers = problem.grid.fiber_count();
  std::vector<FiberResult> results(bases);
  parallel_for(bases, [&](std::size_t b) { results[b] = solve_fiber(problem, fiber_grid, b, tol, max_iter); });

  out.fiber_constants.resize(bases);
  for (std::size_t b = 0; b < bases; ++b) {
    const FiberResult& r = results[b];
    std::copy(r.rho.begin(), r.rho.end(), out.rho.values.begin() + static_cast<std::ptrdiff_t>(b * fibers));
    out.fiber_constants[b] = r.constant;
    out.max_residual = std::max(out.max_residual, r.residual);
    out.max_fiber_mean = std::max(out.max_fiber_mean, r.mean);
    out.max_iterations = std::max(out.max_iterations, r.iterations);
  }
  return out;
}

}  // namespace krf
