// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <string>

#include "krf/barriers.hpp"
#include "krf/error.hpp"
#include "krf/ma_operator.hpp"

namespace krf {

DivisorModel build_divisor_model(const FlowProblem& problem, const ScalarField& profile) {
  const TorusGrid& g = problem.grid;
  if (!(profile.grid == g)) throw ArgumentError("divisor profile lives on a different grid");
  const int kappa = g.base_dims();

  DivisorModel out;
  out.log_s_h = ScalarField(g);
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    const double p = profile[i];
    if (!(p > 0.0) || p > 1.0 + 1e-12 || !std::isfinite(p)) {
      throw ArgumentError("divisor profile must lie in (0, 1]; got " + std::to_string(p) + " at node " +
                          std::to_string(i));
    }
    const double ref = profile[g.compose(g.base_index(i), 0)];
    if (std::abs(p - ref) > 1e-12 * std::max(1.0, std::abs(p))) {
      throw ArgumentError("divisor profile must depend on base coordinates only (node " +
                          std::to_string(i) + ")");
    }
    out.log_s_h[i] = std::min(0.0, std::log(p));
  }

  double a = 0.0;
  for (std::size_t i = 0; i < g.node_count(); ++i) {
    const SmallMatrix h = central_hessian_at(out.log_s_h, i);
    const SmallMatrix neg = -h.block(0, 0, kappa, kappa);
    const SmallMatrix chi = problem.achi.at(i).block(0, 0, kappa, kappa);
    const SmallVector mu = generalized_eigenvalues(neg, chi);
    a = std::max(a, mu(mu.size() - 1));
  }
  out.a_curv = a;
  return out;
}

std::vector<char> DivisorModel::omega_r_mask(double r) const {
  const double log_r = std::log(r);
  std::vector<char> mask(log_s_h.size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = log_s_h[i] >= log_r ? 1 : 0;
  return mask;
}

std::vector<char> DivisorModel::boundary_ring(const std::vector<char>& mask) const {
  const TorusGrid& g = log_s_h.grid;
  std::vector<char> ring(mask.size(), 0);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    for (int d = 0; d < g.n_dims() && !ring[i]; ++d) {
      if (!mask[g.neighbor(i, d, 1)] || !mask[g.neighbor(i, d, -1)]) ring[i] = 1;
    }
  }
  return ring;
}

}  // namespace krf
