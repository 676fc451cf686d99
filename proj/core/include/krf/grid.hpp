// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "krf/linalg.hpp"

namespace krf {

/// Periodic tensor grid on [0, 2*pi)^n. Nodes are stored row-major: axis 0 is
/// the slowest. The first `base_dims` axes are base directions, the rest are
/// fiber directions, so a node index splits as base_index * fiber_count +
/// fiber_index.
class TorusGrid {
 public:
  TorusGrid() = default;

  int n_dims() const noexcept { return static_cast<int>(points_.size()); }
  int base_dims() const noexcept { return base_dims_; }
  int fiber_dims() const noexcept { return n_dims() - base_dims_; }
  const std::vector<int>& points_per_dim() const noexcept { return points_; }
  const std::vector<double>& spacing() const noexcept { return spacing_; }
  double spacing(int axis) const { return spacing_.at(static_cast<std::size_t>(axis)); }

  std::size_t node_count() const noexcept { return node_count_; }
  std::size_t base_count() const noexcept { return base_count_; }
  std::size_t fiber_count() const noexcept { return node_count_ / base_count_; }
  double cell_volume() const noexcept { return cell_volume_; }
  /// Cell volume of the fiber sub-grid (1 when there are no fiber axes).
  double fiber_cell_volume() const noexcept;
  double base_cell_volume() const noexcept;

  std::size_t stride(int axis) const { return strides_.at(static_cast<std::size_t>(axis)); }
  int coordinate_index(std::size_t node, int axis) const;
  double coordinate(std::size_t node, int axis) const;

  /// Periodic shift of `node` by `steps` along `axis`.
  std::size_t neighbor(std::size_t node, int axis, int steps) const;
  /// Periodic shift of `node` by an integer vector (length n_dims).
  std::size_t shifted(std::size_t node, std::span<const int> offset) const;

  std::size_t base_index(std::size_t node) const noexcept { return node / fiber_count(); }
  std::size_t fiber_index(std::size_t node) const noexcept { return node % fiber_count(); }
  std::size_t compose(std::size_t base, std::size_t fiber) const noexcept {
    return base * fiber_count() + fiber;
  }

  /// Grid of the first base_dims axes (with all axes counted as base).
  TorusGrid base_grid() const;
  /// Grid of the trailing fiber axes; requires fiber_dims() > 0.
  TorusGrid fiber_grid() const;

  friend bool operator==(const TorusGrid& a, const TorusGrid& b) {
    return a.points_ == b.points_ && a.base_dims_ == b.base_dims_;
  }

 private:
  friend TorusGrid build_torus_grid(int n_dims, std::vector<int> points_per_dim, int base_dims);

  std::vector<int> points_;
  std::vector<double> spacing_;
  std::vector<std::size_t> strides_;
  int base_dims_ = 0;
  std::size_t node_count_ = 0;
  std::size_t base_count_ = 1;
  double cell_volume_ = 0.0;
};

/// Validates sizes and builds a grid with spacing 2*pi / points per axis.
/// Throws ConfigurationError naming the offending field.
TorusGrid build_torus_grid(int n_dims, std::vector<int> points_per_dim, int base_dims);

/// One real value per grid node.
struct ScalarField {
  TorusGrid grid;
  std::vector<double> values;

  ScalarField() = default;
  explicit ScalarField(TorusGrid g, double fill = 0.0);
  ScalarField(TorusGrid g, std::vector<double> v);

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  std::size_t size() const noexcept { return values.size(); }

  double sup() const;
  double inf() const;
  /// Compensated sum of values times the cell volume.
  double integral() const;
  bool all_finite() const;
};

/// Samples fn(y) at every node, where y holds the node coordinates.
ScalarField sample_field(const TorusGrid& grid,
                         const std::function<double(std::span<const double>)>& fn);

/// One symmetric dim x dim matrix per node, stored contiguously.
class MetricField {
 public:
  MetricField() = default;
  explicit MetricField(TorusGrid grid, int dim = -1);

  const TorusGrid& grid() const noexcept { return grid_; }
  int dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return grid_.node_count(); }

  SmallMatrix at(std::size_t node) const;
  void set(std::size_t node, const SmallMatrix& m);
  double entry(std::size_t node, int i, int j) const {
    return data_[node * static_cast<std::size_t>(dim_ * dim_) + static_cast<std::size_t>(i * dim_ + j)];
  }

 private:
  TorusGrid grid_;
  int dim_ = 0;
  std::vector<double> data_;
};

}  // namespace krf
