// SPDX-License-Identifier: Apache-2.0
#include "krf/ma_operator.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "krf/error.hpp"
#include "krf/parallel.hpp"

namespace krf {

namespace {

double physical_dot(const TorusGrid& grid, const HessianStencil::Direction& a,
                    const HessianStencil::Direction& b) {
  double s = 0.0;
  for (int d = 0; d < grid.n_dims(); ++d) {
    const double h = grid.spacing(d);
    s += a[static_cast<std::size_t>(d)] * b[static_cast<std::size_t>(d)] * h * h;
  }
  return s;
}

void collect_bases(const TorusGrid& grid, const std::vector<HessianStencil::Direction>& dirs,
                   std::vector<int>& current, std::size_t start,
                   std::vector<std::vector<int>>& out) {
  if (static_cast<int>(current.size()) == grid.n_dims()) {
    out.push_back(current);
    return;
  }
  for (std::size_t k = start; k < dirs.size(); ++k) {
    bool orthogonal = true;
    for (int j : current) {
      const auto& e = dirs[static_cast<std::size_t>(j)];
      const double scale = std::sqrt(physical_dot(grid, e, e) * physical_dot(grid, dirs[k], dirs[k]));
      if (std::abs(physical_dot(grid, e, dirs[k])) > 1e-12 * scale) {
        orthogonal = false;
        break;
      }
    }
    if (!orthogonal) continue;
    current.push_back(static_cast<int>(k));
    collect_bases(grid, dirs, current, k + 1, out);
    current.pop_back();
  }
}

void check_same_grid(const TorusGrid& a, const TorusGrid& b, const char* what) {
  if (!(a == b)) throw ArgumentError(std::string(what) + ": fields live on different grids");
}

}  // namespace

HessianStencil HessianStencil::central() { return HessianStencil{}; }

HessianStencil HessianStencil::wide(const TorusGrid& grid, int radius) {
  if (radius < 1) throw ArgumentError("wide stencil radius must be >= 1");
  HessianStencil s;
  s.scheme_ = StencilScheme::kWide;
  s.radius_ = radius;
  s.dims_ = grid.n_dims();
  const int n = grid.n_dims();
  const int side = 2 * radius + 1;
  int total = 1;
  for (int d = 0; d < n; ++d) total *= side;
  for (int code = 0; code < total; ++code) {
    Direction e{};
    int c = code;
    for (int d = n - 1; d >= 0; --d) {
      e[static_cast<std::size_t>(d)] = c % side - radius;
      c /= side;
    }
    // Keep primitive vectors with a positive leading entry.
    int lead = 0;
    int g = 0;
    for (int d = 0; d < n; ++d) {
      const int v = e[static_cast<std::size_t>(d)];
      if (lead == 0 && v != 0) lead = v;
      g = std::gcd(g, std::abs(v));
    }
    if (lead <= 0 || g != 1) continue;
    s.directions_.push_back(e);
  }
  std::vector<int> current;
  collect_bases(grid, s.directions_, current, 0, s.bases_);
  std::vector<char> used(s.directions_.size(), 0);
  for (const auto& basis : s.bases_)
    for (int k : basis) used[static_cast<std::size_t>(k)] = 1;
  for (std::size_t k = 0; k < used.size(); ++k)
    if (used[k]) s.used_.push_back(static_cast<int>(k));
  return s;
}

SmallMatrix central_hessian_at(const ScalarField& field, std::size_t node) {
  const TorusGrid& g = field.grid;
  const int n = g.n_dims();
  SmallMatrix h(n, n);
  const double f0 = field[node];
  for (int i = 0; i < n; ++i) {
    const double hi = g.spacing(i);
    h(i, i) = (field[g.neighbor(node, i, 1)] - 2.0 * f0 + field[g.neighbor(node, i, -1)]) / (hi * hi);
    for (int j = i + 1; j < n; ++j) {
      const double hj = g.spacing(j);
      const std::size_t p = g.neighbor(node, i, 1);
      const std::size_t m = g.neighbor(node, i, -1);
      const double v = (field[g.neighbor(p, j, 1)] - field[g.neighbor(p, j, -1)] -
                        field[g.neighbor(m, j, 1)] + field[g.neighbor(m, j, -1)]) /
                       (4.0 * hi * hj);
      h(i, j) = v;
      h(j, i) = v;
    }
  }
  return h;
}

double directional_second_difference(const ScalarField& field, std::size_t node,
                                     const HessianStencil::Direction& e) {
  const TorusGrid& g = field.grid;
  const auto n = static_cast<std::size_t>(g.n_dims());
  std::array<int, kMaxDims> neg{};
  double len2 = 0.0;
  for (std::size_t d = 0; d < n; ++d) {
    neg[d] = -e[d];
    const double v = e[d] * g.spacing(static_cast<int>(d));
    len2 += v * v;
  }
  const double fp = field[g.shifted(node, std::span<const int>(e.data(), n))];
  const double fm = field[g.shifted(node, std::span<const int>(neg.data(), n))];
  return (fp - 2.0 * field[node] + fm) / len2;
}

MetricField discrete_hessian(const ScalarField& field, const HessianStencil& stencil) {
  (void)stencil;
  MetricField out(field.grid);
  parallel_for(field.grid.node_count(), [&](std::size_t i) { out.set(i, central_hessian_at(field, i)); });
  return out;
}

StencilDeterminant stencil_determinant(const SmallMatrix& theta, const ScalarField& phi,
                                       std::size_t node, const HessianStencil& stencil) {
  StencilDeterminant out;
  if (stencil.scheme() == StencilScheme::kCentral) {
    const SmallMatrix m = theta + central_hessian_at(phi, node);
    const SmallVector ev = symmetric_eigenvalues(m);
    out.definite = ev(0) > 0.0;
    out.det = det_plus(m);
    return out;
  }
  if (stencil.dims() != phi.grid.n_dims()) {
    throw ArgumentError("wide stencil was built for a different dimension");
  }
  const TorusGrid& g = phi.grid;
  const int n = g.n_dims();
  // Directional values q_e = e^T theta e / |e|^2 + D_ee phi, computed once per direction.
  const auto& dirs = stencil.directions();
  std::array<double, 64> cache_buf{};
  std::vector<double> cache_vec;
  double* q = cache_buf.data();
  if (dirs.size() > cache_buf.size()) {
    cache_vec.resize(dirs.size());
    q = cache_vec.data();
  }
  double min_q = std::numeric_limits<double>::infinity();
  for (int k : stencil.used_directions()) {
    const auto& e = dirs[static_cast<std::size_t>(k)];
    SmallVector v(n);
    for (int d = 0; d < n; ++d) v(d) = e[static_cast<std::size_t>(d)] * g.spacing(d);
    const double val = v.dot(theta * v) / v.squaredNorm() + directional_second_difference(phi, node, e);
    q[k] = val;
    min_q = std::min(min_q, val);
  }
  double best = std::numeric_limits<double>::infinity();
  for (const auto& basis : stencil.bases()) {
    double prod = 1.0;
    for (int k : basis) prod *= std::max(q[static_cast<std::size_t>(k)], 0.0);
    best = std::min(best, prod);
  }
  out.definite = min_q > 0.0;
  out.det = std::isfinite(best) ? best : 0.0;
  return out;
}

double collapse_factor(const FlowProblem& problem, double t) {
  return problem.binom * std::exp(-(problem.n() - problem.kappa()) * t);
}

ScalarField ma_density(const FlowProblem& problem, double t, const ScalarField& phi,
                       const HessianStencil& stencil) {
  if (!(t >= 0.0)) throw ArgumentError("ma_density: t must be >= 0");
  check_same_grid(problem.grid, phi.grid, "ma_density");
  const double norm = collapse_factor(problem, t);
  ScalarField out(problem.grid);
  parallel_for(problem.grid.node_count(), [&](std::size_t i) {
    out[i] = stencil_determinant(theta_at_node(problem, i, t), phi, i, stencil).det / norm;
  });
  return out;
}

ScalarField ma_density_strict(const FlowProblem& problem, double t, const ScalarField& phi,
                              const HessianStencil& stencil) {
  if (!(t >= 0.0)) throw ArgumentError("ma_density_strict: t must be >= 0");
  check_same_grid(problem.grid, phi.grid, "ma_density_strict");
  const double norm = collapse_factor(problem, t);
  ScalarField out(problem.grid);
  for (std::size_t i = 0; i < problem.grid.node_count(); ++i) {
    const StencilDeterminant d = stencil_determinant(theta_at_node(problem, i, t), phi, i, stencil);
    if (!d.definite) throw AdmissibilityError("theta_t + D^2 phi is not positive definite", i);
    out[i] = d.det / norm;
  }
  return out;
}

double ResidualField::worst_sub_violation(const std::vector<char>& mask) const {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    const double v = admissible[i] ? (-tol - r[i]) : std::numeric_limits<double>::infinity();
    worst = std::max(worst, v);
  }
  return worst;
}

double ResidualField::worst_super_violation(const std::vector<char>& mask) const {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    worst = std::max(worst, r[i] - tol);
  }
  return worst;
}

ResidualField residual(const FlowProblem& problem, double t, const ScalarField& phi,
                       const ScalarField& phi_dot, const HessianStencil& stencil,
                       const ResidualOptions& options) {
  if (!(options.relative_floor > 0.0) || !(options.absolute_floor > 0.0)) {
    throw ConfigurationError("residual: density floor must be > 0");
  }
  if (!(t >= 0.0)) throw ArgumentError("residual: t must be >= 0");
  check_same_grid(problem.grid, phi.grid, "residual");
  check_same_grid(problem.grid, phi_dot.grid, "residual");

  const std::size_t nodes = problem.grid.node_count();
  const double norm = collapse_factor(problem, t);
  const int n = problem.n();
  ResidualField out;
  out.grid = problem.grid;
  out.tol = options.tol;
  out.r.resize(nodes);
  out.tags.resize(nodes);
  out.admissible.resize(nodes);
  parallel_for(nodes, [&](std::size_t i) {
    const StencilDeterminant d = stencil_determinant(theta_at_node(problem, i, t), phi, i, stencil);
    const double f = problem.f_mu[i];
    const double floor = std::max(options.relative_floor * f, options.absolute_floor);
    double y[kMaxDims];
    for (int k = 0; k < n; ++k) y[k] = problem.grid.coordinate(i, k);
    const double reaction = problem.reaction(std::span<const double>(y, static_cast<std::size_t>(n)), t, phi[i]);
    const double r = std::log(std::max(d.det / norm, floor)) - std::log(f) - phi_dot[i] - reaction;
    out.r[i] = r;
    out.admissible[i] = d.definite ? 1 : 0;
    int tag = 0;
    if (d.definite && r >= -options.tol) tag |= 1;
    if (r <= options.tol) tag |= 2;
    out.tags[i] = static_cast<ResidualTag>(tag);
  });
  return out;
}

namespace {

// Cholesky of M = theta + D^2 phi at one node; throws if M is not definite.
Eigen::LLT<SmallMatrix> factor_node(const MetricField& theta, const ScalarField& phi, std::size_t i) {
  const SmallMatrix m = theta.at(i) + central_hessian_at(phi, i);
  Eigen::LLT<SmallMatrix> llt(m);
  if (llt.info() != Eigen::Success || !is_positive_definite(m)) {
    throw AdmissibilityError("theta + D^2 phi is not positive definite", i);
  }
  return llt;
}

double log_det_from(const Eigen::LLT<SmallMatrix>& llt) {
  const auto& l = llt.matrixLLT();
  double s = 0.0;
  for (Eigen::Index k = 0; k < l.rows(); ++k) s += std::log(l(k, k));
  return 2.0 * s;
}

}  // namespace

std::vector<double> log_det_field(const MetricField& theta, const ScalarField& phi) {
  check_same_grid(theta.grid(), phi.grid, "log_det_field");
  std::vector<double> out(phi.size());
  parallel_for(phi.size(), [&](std::size_t i) { out[i] = log_det_from(factor_node(theta, phi, i)); });
  return out;
}

LogDetLinearization linearize_log_det(const MetricField& theta, const ScalarField& phi) {
  check_same_grid(theta.grid(), phi.grid, "linearize_log_det");
  const TorusGrid& g = phi.grid;
  const int n = g.n_dims();
  const std::size_t nodes = g.node_count();
  const std::size_t per_node = static_cast<std::size_t>(1 + 2 * n + 2 * n * (n - 1));

  LogDetLinearization out;
  out.log_det.resize(nodes);
  std::vector<Eigen::Triplet<double>> triplets(nodes * per_node);
  parallel_for(nodes, [&](std::size_t i) {
    const Eigen::LLT<SmallMatrix> llt = factor_node(theta, phi, i);
    out.log_det[i] = log_det_from(llt);
    const SmallMatrix inv = llt.solve(SmallMatrix::Identity(n, n));
    const auto row = static_cast<int>(i);
    std::size_t k = i * per_node;
    double center = 0.0;
    for (int a = 0; a < n; ++a) {
      const double ha = g.spacing(a);
      const double w = inv(a, a) / (ha * ha);
      triplets[k++] = {row, static_cast<int>(g.neighbor(i, a, 1)), w};
      triplets[k++] = {row, static_cast<int>(g.neighbor(i, a, -1)), w};
      center -= 2.0 * w;
      for (int b = a + 1; b < n; ++b) {
        // Both (a,b) and (b,a) entries of M^{-1} multiply the same cross difference.
        const double c = 2.0 * inv(a, b) / (4.0 * ha * g.spacing(b));
        const std::size_t p = g.neighbor(i, a, 1);
        const std::size_t m = g.neighbor(i, a, -1);
        triplets[k++] = {row, static_cast<int>(g.neighbor(p, b, 1)), c};
        triplets[k++] = {row, static_cast<int>(g.neighbor(p, b, -1)), -c};
        triplets[k++] = {row, static_cast<int>(g.neighbor(m, b, 1)), -c};
        triplets[k++] = {row, static_cast<int>(g.neighbor(m, b, -1)), c};
      }
    }
    triplets[k++] = {row, row, center};
  });
  out.jacobian.resize(static_cast<Eigen::Index>(nodes), static_cast<Eigen::Index>(nodes));
  out.jacobian.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

}  // namespace krf
