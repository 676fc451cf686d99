// SPDX-License-Identifier: Apache-2.0
#include "krf/linalg.hpp"

#include <cmath>

#include "krf/error.hpp"

namespace krf {

bool is_symmetric(const SmallMatrix& m, double rel_tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < m.cols(); ++j) {
      if (std::abs(m(i, j) - m(j, i)) > rel_tol * scale) return false;
    }
  }
  return true;
}

SmallVector symmetric_eigenvalues(const SmallMatrix& m) {
  if (m.rows() == 1) return SmallVector::Constant(1, m(0, 0));
  if (m.rows() == 2) {
    // Closed form avoids the iterative solver on the hot path.
    const double a = m(0, 0);
    const double d = m(1, 1);
    const double b = 0.5 * (m(0, 1) + m(1, 0));
    const double mean = 0.5 * (a + d);
    const double radius = std::hypot(0.5 * (a - d), b);
    SmallVector out(2);
    out << mean - radius, mean + radius;
    return out;
  }
  Eigen::SelfAdjointEigenSolver<SmallMatrix> solver(m, Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

double det_plus(const SmallMatrix& m) {
  if (!is_symmetric(m)) throw ArgumentError("det_plus: matrix is not symmetric");
  const SmallVector ev = symmetric_eigenvalues(m);
  const double norm = ev.cwiseAbs().maxCoeff();
  if (ev(0) < -1e-12 * norm) return 0.0;
  double det = 1.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) det *= std::max(ev(i), 0.0);
  return det;
}

bool is_positive_definite(const SmallMatrix& m) { return symmetric_eigenvalues(m)(0) > 0.0; }

SmallVector generalized_eigenvalues(const SmallMatrix& a, const SmallMatrix& b) {
  if (a.rows() == 1) return SmallVector::Constant(1, a(0, 0) / b(0, 0));
  Eigen::GeneralizedSelfAdjointEigenSolver<SmallMatrix> solver(a, b, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw ArgumentError("generalized_eigenvalues: second matrix is not positive definite");
  }
  return solver.eigenvalues();
}

std::vector<double> pencil_coefficients(const SmallMatrix& p, const SmallMatrix& q) {
  const SmallVector mu = generalized_eigenvalues(p, q);
  const auto n = static_cast<std::size_t>(mu.size());
  // Elementary symmetric polynomials by the usual product expansion.
  std::vector<double> e(n + 1, 0.0);
  e[0] = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j > 0; --j) e[j] += mu(static_cast<Eigen::Index>(i)) * e[j - 1];
  }
  const double det_q = q.determinant();
  for (double& c : e) c *= det_q;
  return e;
}

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double out = 1.0;
  for (int i = 1; i <= k; ++i) out = out * (n - k + i) / i;
  return out;
}

}  // namespace krf
