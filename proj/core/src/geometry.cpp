// SPDX-License-Identifier: Apache-2.0
#include "krf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "krf/error.hpp"
#include "krf/parallel.hpp"

namespace krf {

ReactionSpec ReactionSpec::identity() { return ReactionSpec{}; }

ReactionSpec ReactionSpec::affine(double slope, Expression offset) {
  if (!(slope >= 0.0)) throw ModelError("reaction slope must be >= 0 so F is non-decreasing in r");
  ReactionSpec r;
  r.kind_ = Kind::kAffine;
  r.slope_ = slope;
  r.offset_ = std::move(offset);
  return r;
}

double ReactionSpec::offset_at(std::span<const double> y, double t) const {
  return kind_ == Kind::kIdentity ? 0.0 : offset_(y, t);
}

namespace {

void node_coords(const TorusGrid& g, std::size_t node, double* y) {
  for (int d = 0; d < g.n_dims(); ++d) y[d] = g.coordinate(node, d);
}

SmallMatrix block(const SmallMatrix& m, int begin, int size) {
  return m.block(begin, begin, size, size);
}

}  // namespace

FlowProblem make_problem(TorusGrid grid, MetricField a0, MetricField achi, ScalarField f_mu,
                         ReactionSpec reaction) {
  const int n = grid.n_dims();
  const int kappa = grid.base_dims();
  if (!(a0.grid() == grid) || !(achi.grid() == grid) || !(f_mu.grid == grid)) {
    throw ArgumentError("make_problem: fields live on different grids");
  }
  if (a0.dim() != n || achi.dim() != n) throw ArgumentError("make_problem: metric dimension mismatch");

  for (std::size_t i = 0; i < grid.node_count(); ++i) {
    const SmallMatrix a = a0.at(i);
    if (!is_symmetric(a)) throw ModelError("A0 is not symmetric at node " + std::to_string(i));
    if (!is_positive_definite(a)) throw ModelError("A0 is not positive definite at node " + std::to_string(i));

    const SmallMatrix x = achi.at(i);
    if (!is_symmetric(x)) throw ModelError("Achi is not symmetric at node " + std::to_string(i));
    const double scale = std::max(1.0, x.cwiseAbs().maxCoeff());
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) {
        if ((r >= kappa || c >= kappa) && std::abs(x(r, c)) > 1e-14 * scale) {
          throw ModelError("Achi must vanish outside the base block (node " + std::to_string(i) + ")");
        }
      }
    }
    if (!is_positive_definite(block(x, 0, kappa))) {
      throw ModelError("Achi base block is not positive definite at node " + std::to_string(i));
    }
    const std::size_t ref = grid.compose(grid.base_index(i), 0);
    if (ref != i && ((x - achi.at(ref)).cwiseAbs().maxCoeff() > 1e-12 * scale)) {
      throw ModelError("Achi must be constant along fibers (node " + std::to_string(i) + ")");
    }
    if (!std::isfinite(f_mu[i]) || !(f_mu[i] > 0.0)) {
      throw ModelError("f_mu must be finite and > 0 (node " + std::to_string(i) + ")");
    }
  }

  FlowProblem p;
  p.grid = std::move(grid);
  p.a0 = std::move(a0);
  p.achi = std::move(achi);
  p.f_mu = std::move(f_mu);
  p.reaction = std::move(reaction);
  p.binom = binomial(n, kappa);
  return p;
}

FlowProblem build_product_problem(const ModelSpec& spec) {
  TorusGrid grid = build_torus_grid(spec.n_dims, spec.points, spec.kappa);
  const int n = grid.n_dims();
  const int kappa = grid.base_dims();

  const auto check_coords = [n](const Expression& e, const std::string& name) {
    if (e.max_coordinate() > n) {
      throw ConfigurationError(name + ": references y" + std::to_string(e.max_coordinate()) +
                               " but dims = " + std::to_string(n));
    }
  };

  // Resolve A0 entries (identity by default) and the optional closed-form part.
  std::vector<Expression> a0_expr(static_cast<std::size_t>(n * n));
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      std::optional<Expression> e;
      if (static_cast<std::size_t>(i) < spec.a0.size() && static_cast<std::size_t>(j) < spec.a0[static_cast<std::size_t>(i)].size()) {
        e = spec.a0[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      }
      Expression v = e ? *e : Expression::constant(i == j ? 1.0 : 0.0);
      check_coords(v, "A0");
      a0_expr[static_cast<std::size_t>(i * n + j)] = v;
      a0_expr[static_cast<std::size_t>(j * n + i)] = v;
    }
  }
  std::vector<Expression> hess;
  if (spec.a0_potential) {
    check_coords(*spec.a0_potential, "A0 potential");
    hess.resize(static_cast<std::size_t>(n * n));
    for (int i = 0; i < n; ++i) {
      const Expression di = spec.a0_potential->derivative(i);
      for (int j = i; j < n; ++j) {
        hess[static_cast<std::size_t>(i * n + j)] = di.derivative(j);
        hess[static_cast<std::size_t>(j * n + i)] = hess[static_cast<std::size_t>(i * n + j)];
      }
    }
  }

  std::vector<Expression> chi_expr(static_cast<std::size_t>(kappa * kappa));
  for (int i = 0; i < kappa; ++i) {
    for (int j = i; j < kappa; ++j) {
      std::optional<Expression> e;
      if (static_cast<std::size_t>(i) < spec.achi.size() && static_cast<std::size_t>(j) < spec.achi[static_cast<std::size_t>(i)].size()) {
        e = spec.achi[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      }
      Expression v = e ? *e : Expression::constant(i == j ? 1.0 : 0.0);
      check_coords(v, "Achi");
      for (int d = kappa; d < n; ++d) {
        if (v.depends_on_coordinate(d)) {
          throw ModelError("Achi entries may only depend on base coordinates y1..y" + std::to_string(kappa));
        }
      }
      chi_expr[static_cast<std::size_t>(i * kappa + j)] = v;
      chi_expr[static_cast<std::size_t>(j * kappa + i)] = v;
    }
  }
  check_coords(spec.f_mu, "f_mu");

  MetricField a0(grid);
  MetricField achi(grid);
  ScalarField f(grid);
  parallel_for(grid.node_count(), [&](std::size_t node) {
    double y[kMaxDims];
    node_coords(grid, node, y);
    const std::span<const double> ys(y, static_cast<std::size_t>(n));
    SmallMatrix a(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        a(i, j) = a0_expr[static_cast<std::size_t>(i * n + j)](ys);
        if (!hess.empty()) a(i, j) += hess[static_cast<std::size_t>(i * n + j)](ys);
      }
    }
    a0.set(node, a);
    SmallMatrix x = SmallMatrix::Zero(n, n);
    for (int i = 0; i < kappa; ++i)
      for (int j = 0; j < kappa; ++j) x(i, j) = chi_expr[static_cast<std::size_t>(i * kappa + j)](ys);
    achi.set(node, x);
    f[node] = spec.f_mu(ys);
  });

  FlowProblem p = make_problem(std::move(grid), std::move(a0), std::move(achi), std::move(f), spec.reaction);
  if (!spec.normalize) return p;

  Normalization norm;
  norm.f_mu_mass_before = p.f_mu.integral();
  norm.f_mu_scale = 1.0 / norm.f_mu_mass_before;
  for (double& v : p.f_mu.values) v *= norm.f_mu_scale;

  norm.mixed_mass_before = mixed_volume_density(p).integral();
  if (kappa < n) {
    norm.a0_scale = std::pow(norm.mixed_mass_before, -1.0 / (n - kappa));
    for (std::size_t i = 0; i < p.grid.node_count(); ++i) p.a0.set(i, p.a0.at(i) * norm.a0_scale);
  } else {
    norm.achi_scale = std::pow(norm.mixed_mass_before, -1.0 / n);
    for (std::size_t i = 0; i < p.grid.node_count(); ++i) p.achi.set(i, p.achi.at(i) * norm.achi_scale);
  }
  p.normalization = norm;
  return p;
}

ScalarField mixed_volume_density(const FlowProblem& problem) {
  ScalarField out(problem.grid);
  const auto kappa = static_cast<std::size_t>(problem.kappa());
  parallel_for(problem.grid.node_count(), [&](std::size_t i) {
    const std::vector<double> c = pencil_coefficients(problem.achi.at(i), problem.a0.at(i));
    out[i] = c[kappa] / problem.binom;
  });
  return out;
}

SmallMatrix theta_at_node(const FlowProblem& problem, std::size_t node, double t) {
  const double decay = std::exp(-t);
  const double grow = -std::expm1(-t);
  return decay * problem.a0.at(node) + grow * problem.achi.at(node);
}

MetricField theta_at(const FlowProblem& problem, double t) {
  if (!(t >= 0.0)) throw ArgumentError("theta_at: t must be >= 0");
  MetricField out(problem.grid);
  parallel_for(problem.grid.node_count(), [&](std::size_t i) { out.set(i, theta_at_node(problem, i, t)); });
  return out;
}

ScalarField pushforward_density(const FlowProblem& problem) {
  const TorusGrid base = problem.grid.base_grid();
  ScalarField w(base);
  const std::size_t fibers = problem.grid.fiber_count();
  const double cell = problem.grid.fiber_cell_volume();
  parallel_for(base.node_count(), [&](std::size_t b) {
    const std::span<const double> fiber(problem.f_mu.values.data() + b * fibers, fibers);
    w[b] = compensated_sum(fiber) * cell;
  });
  return w;
}

double SemiFlatField::fiber_volume(std::size_t base_node, int fiber_dims) const {
  return fiber_constants.at(base_node) * std::pow(2.0 * std::numbers::pi, fiber_dims);
}

RegularityCertificate check_regular_family(const FlowProblem& problem, double epsilon, double t_max,
                                           int sample_count) {
  if (!(epsilon > 0.0)) throw ArgumentError("check_regular_family: epsilon must be > 0");
  if (!(t_max >= 0.0)) throw ArgumentError("check_regular_family: t_max must be >= 0");
  if (sample_count < 2) throw ArgumentError("check_regular_family: need at least 2 samples");

  const std::size_t nodes = problem.grid.node_count();
  RegularityCertificate cert;
  cert.epsilon = epsilon;

  // Floor: theta_t >= m * Achi with m = min(1, 1 / max generalized eigenvalue of (Achi, A0)).
  double m = 1.0;
  for (std::size_t i = 0; i < nodes; ++i) {
    const SmallVector mu = generalized_eigenvalues(problem.achi.at(i), problem.a0.at(i));
    const double top = mu(mu.size() - 1);
    if (top > 0.0) m = std::min(m, 1.0 / top);
  }
  cert.floor_scale = m;
  cert.floor_ok = true;

  // Pairs straddle each sample time at offsets strictly inside (-eps, eps).
  constexpr double kOffsets[] = {-0.999999, -0.5, 0.5, 0.999999};
  std::vector<double> e_node(nodes, 0.0);
  std::vector<char> floor_node(nodes, 1);
  for (int s = 0; s < sample_count; ++s) {
    const double t = t_max * s / (sample_count - 1);
    for (double off : kOffsets) {
      const double tp = t + off * epsilon;
      if (tp < 0.0) continue;
      parallel_for(nodes, [&](std::size_t i) {
        const SmallMatrix th = theta_at_node(problem, i, t);
        if (!is_positive_definite(th)) throw InternalError("theta_t indefinite at node " + std::to_string(i));
        const SmallVector lam = generalized_eigenvalues(theta_at_node(problem, i, tp), th);
        e_node[i] = std::max(lam(lam.size() - 1) - 1.0, 1.0 - lam(0));
        const SmallMatrix gap = th - m * problem.achi.at(i);
        if (symmetric_eigenvalues(gap)(0) < -1e-12 * th.norm()) floor_node[i] = 0;
      });
      const double e_pair = std::max(0.0, *std::max_element(e_node.begin(), e_node.end()));
      cert.samples.push_back({t, tp, e_pair});
      cert.e_of_epsilon = std::max(cert.e_of_epsilon, e_pair);
    }
  }
  for (char ok : floor_node) cert.floor_ok = cert.floor_ok && ok;
  return cert;
}

}  // namespace krf
