// SPDX-License-Identifier: Apache-2.0
#include "krf/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "krf/error.hpp"
#include "krf/parallel.hpp"

namespace krf {

TorusGrid build_torus_grid(int n_dims, std::vector<int> points_per_dim, int base_dims) {
  if (n_dims < 1 || n_dims > kMaxDims) {
    throw ConfigurationError("dims: expected 1.." + std::to_string(kMaxDims) + ", got " +
                             std::to_string(n_dims));
  }
  if (static_cast<int>(points_per_dim.size()) != n_dims) {
    throw ConfigurationError("points: expected " + std::to_string(n_dims) + " entries, got " +
                             std::to_string(points_per_dim.size()));
  }
  for (std::size_t d = 0; d < points_per_dim.size(); ++d) {
    if (points_per_dim[d] < 4) {
      throw ConfigurationError("points[" + std::to_string(d) + "]: need at least 4, got " +
                               std::to_string(points_per_dim[d]));
    }
  }
  if (base_dims < 1 || base_dims > n_dims) {
    throw ConfigurationError("kappa: expected 1.." + std::to_string(n_dims) + ", got " +
                             std::to_string(base_dims));
  }

  TorusGrid g;
  g.points_ = std::move(points_per_dim);
  g.base_dims_ = base_dims;
  g.spacing_.resize(g.points_.size());
  g.strides_.resize(g.points_.size());
  std::size_t stride = 1;
  for (int d = n_dims - 1; d >= 0; --d) {
    const auto du = static_cast<std::size_t>(d);
    g.strides_[du] = stride;
    stride *= static_cast<std::size_t>(g.points_[du]);
    g.spacing_[du] = 2.0 * std::numbers::pi / g.points_[du];
  }
  g.node_count_ = stride;
  g.base_count_ = 1;
  for (int d = 0; d < base_dims; ++d) g.base_count_ *= static_cast<std::size_t>(g.points_[static_cast<std::size_t>(d)]);
  g.cell_volume_ = 1.0;
  for (double h : g.spacing_) g.cell_volume_ *= h;
  return g;
}

double TorusGrid::fiber_cell_volume() const noexcept {
  double v = 1.0;
  for (int d = base_dims_; d < n_dims(); ++d) v *= spacing_[static_cast<std::size_t>(d)];
  return v;
}

double TorusGrid::base_cell_volume() const noexcept {
  double v = 1.0;
  for (int d = 0; d < base_dims_; ++d) v *= spacing_[static_cast<std::size_t>(d)];
  return v;
}

int TorusGrid::coordinate_index(std::size_t node, int axis) const {
  const auto a = static_cast<std::size_t>(axis);
  return static_cast<int>((node / strides_[a]) % static_cast<std::size_t>(points_[a]));
}

double TorusGrid::coordinate(std::size_t node, int axis) const {
  return coordinate_index(node, axis) * spacing_[static_cast<std::size_t>(axis)];
}

std::size_t TorusGrid::neighbor(std::size_t node, int axis, int steps) const {
  const auto a = static_cast<std::size_t>(axis);
  const int p = points_[a];
  const int i = coordinate_index(node, axis);
  int j = (i + steps) % p;
  if (j < 0) j += p;
  return node + (static_cast<std::size_t>(j) - static_cast<std::size_t>(i)) * strides_[a];
}

std::size_t TorusGrid::shifted(std::size_t node, std::span<const int> offset) const {
  std::size_t out = node;
  for (int d = 0; d < n_dims(); ++d) {
    const int s = offset[static_cast<std::size_t>(d)];
    if (s != 0) out = neighbor(out, d, s);
  }
  return out;
}

TorusGrid TorusGrid::base_grid() const {
  std::vector<int> pts(points_.begin(), points_.begin() + base_dims_);
  return build_torus_grid(base_dims_, std::move(pts), base_dims_);
}

TorusGrid TorusGrid::fiber_grid() const {
  if (fiber_dims() == 0) throw ArgumentError("fiber_grid: grid has no fiber axes");
  std::vector<int> pts(points_.begin() + base_dims_, points_.end());
  return build_torus_grid(fiber_dims(), std::move(pts), fiber_dims());
}

ScalarField::ScalarField(TorusGrid g, double fill)
    : grid(std::move(g)), values(grid.node_count(), fill) {}

ScalarField::ScalarField(TorusGrid g, std::vector<double> v) : grid(std::move(g)), values(std::move(v)) {
  if (values.size() != grid.node_count()) {
    throw ArgumentError("ScalarField: value count does not match grid");
  }
}

double ScalarField::sup() const { return *std::max_element(values.begin(), values.end()); }
double ScalarField::inf() const { return *std::min_element(values.begin(), values.end()); }
double ScalarField::integral() const { return compensated_sum(values) * grid.cell_volume(); }
bool ScalarField::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

ScalarField sample_field(const TorusGrid& grid,
                         const std::function<double(std::span<const double>)>& fn) {
  ScalarField out(grid);
  parallel_for(grid.node_count(), [&](std::size_t i) {
    double y[kMaxDims];
    for (int d = 0; d < grid.n_dims(); ++d) y[d] = grid.coordinate(i, d);
    out.values[i] = fn(std::span<const double>(y, static_cast<std::size_t>(grid.n_dims())));
  });
  return out;
}

MetricField::MetricField(TorusGrid grid, int dim)
    : grid_(std::move(grid)), dim_(dim < 0 ? grid_.n_dims() : dim) {
  data_.assign(grid_.node_count() * static_cast<std::size_t>(dim_ * dim_), 0.0);
}

SmallMatrix MetricField::at(std::size_t node) const {
  SmallMatrix m(dim_, dim_);
  const double* p = data_.data() + node * static_cast<std::size_t>(dim_ * dim_);
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j < dim_; ++j) m(i, j) = p[i * dim_ + j];
  return m;
}

void MetricField::set(std::size_t node, const SmallMatrix& m) {
  double* p = data_.data() + node * static_cast<std::size_t>(dim_ * dim_);
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j < dim_; ++j) p[i * dim_ + j] = m(i, j);
}

}  // namespace krf
