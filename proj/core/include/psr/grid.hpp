#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "psr/error.hpp"

namespace psr {

using Vec3 = Eigen::Vector3d;
using Vec3i = Eigen::Vector3i;
using Index = std::int64_t;

/// Geometry of a cubical voxel grid over the periodic unit cube [0,1)^3.
///
/// The grid has `resolution` nodes per axis at coordinates j / resolution,
/// j = 0..resolution-1. The linear index layout is x-fastest and fixed for
/// the whole library (including file dumps):
///
///   index = x + resolution * (y + resolution * z)
class GridSpec {
 public:
  /// resolution must be even and at least 4.
  explicit GridSpec(int resolution);

  int resolution() const { return r_; }
  Index voxel_count() const {
    return static_cast<Index>(r_) * r_ * r_;
  }
  double voxel_size() const { return 1.0 / r_; }

  Index linear_index(int x, int y, int z) const {
    return static_cast<Index>(x) +
           static_cast<Index>(r_) * (static_cast<Index>(y) +
                                     static_cast<Index>(r_) * z);
  }
  Vec3i coords(Index index) const {
    const int x = static_cast<int>(index % r_);
    const int y = static_cast<int>((index / r_) % r_);
    const int z = static_cast<int>(index / (static_cast<Index>(r_) * r_));
    return {x, y, z};
  }
  Vec3 node_position(int x, int y, int z) const {
    const double s = voxel_size();
    return {x * s, y * s, z * s};
  }

  bool operator==(const GridSpec&) const = default;

 private:
  int r_;
};

/// Scalar field sampled on the grid nodes (the indicator chi or the raw
/// pre-normalization solve output).
struct ScalarGrid {
  ScalarGrid() : spec(4) {}
  explicit ScalarGrid(const GridSpec& s)
      : spec(s), values(static_cast<std::size_t>(s.voxel_count()), 0.0) {}

  GridSpec spec;
  std::vector<double> values;

  double& at(int x, int y, int z) {
    return values[static_cast<std::size_t>(spec.linear_index(x, y, z))];
  }
  double at(int x, int y, int z) const {
    return values[static_cast<std::size_t>(spec.linear_index(x, y, z))];
  }
};

/// Three-channel vector field on the grid nodes (the rasterized normal
/// field). Storage is channel-major: channel c occupies
/// values[c * voxel_count .. (c+1) * voxel_count).
struct VectorGrid {
  VectorGrid() : spec(4) {}
  explicit VectorGrid(const GridSpec& s)
      : spec(s),
        values(static_cast<std::size_t>(3 * s.voxel_count()), 0.0) {}

  GridSpec spec;
  std::vector<double> values;

  double* channel(int c) {
    return values.data() + static_cast<std::size_t>(c) *
                               static_cast<std::size_t>(spec.voxel_count());
  }
  const double* channel(int c) const {
    return values.data() + static_cast<std::size_t>(c) *
                               static_cast<std::size_t>(spec.voxel_count());
  }
  double& at(int c, Index i) {
    return values[static_cast<std::size_t>(
        c * spec.voxel_count() + i)];
  }
  double at(int c, Index i) const {
    return values[static_cast<std::size_t>(c * spec.voxel_count() + i)];
  }
};

/// Integer DFT wavenumbers for the grid, in standard FFT output order:
/// along each axis the wavenumber at grid coordinate j is
///
///   u(j) = j            for j < r/2
///   u(j) = j - r        for j >= r/2        (so u ranges over -r/2 .. r/2-1)
///
/// e.g. r=4 gives [0, 1, -2, -1]. Wavenumbers are in cycles per unit domain.
class FrequencyGrid {
 public:
  explicit FrequencyGrid(const GridSpec& spec);

  const GridSpec& spec() const { return spec_; }

  /// Wavenumber along one axis at grid coordinate j (same table per axis).
  int wavenumber(int j) const { return wavenumbers_[static_cast<std::size_t>(j)]; }

  Vec3i wavenumbers_at(Index index) const {
    const Vec3i c = spec_.coords(index);
    return {wavenumber(c.x()), wavenumber(c.y()), wavenumber(c.z())};
  }
  double norm_sq(Index index) const {
    const Vec3i u = wavenumbers_at(index);
    return static_cast<double>(u.squaredNorm());
  }

 private:
  GridSpec spec_;
  std::vector<int> wavenumbers_;
};

FrequencyGrid frequency_grid(const GridSpec& spec);

/// The 8 periodic cell corners enclosing a point, their interpolation
/// weights, and the one-sided weight derivatives of the enclosing cell.
struct TrilinearStencil {
  std::array<Index, 8> corner;
  std::array<double, 8> weight;       // non-negative, sums to 1
  std::array<Vec3, 8> weight_grad;    // d(weight)/d(point)
};

/// Wraps a coordinate into [0,1) allowing at most one periodic wrap;
/// anything farther out raises DomainError.
Vec3 wrap_point(const Vec3& p);

TrilinearStencil trilinear_weights(const Vec3& p, const GridSpec& spec);

std::vector<double> sample_trilinear(const ScalarGrid& grid,
                                     std::span<const Vec3> points);

struct SampleGrad {
  ScalarGrid grad_grid;          // scatter of upstream through the weights
  std::vector<Vec3> grad_points; // piecewise derivative within each cell
};

/// Adjoint of sample_trilinear: distributes `upstream` back onto the grid
/// and differentiates the sampled values with respect to point positions.
SampleGrad sample_trilinear_grad(const ScalarGrid& grid,
                                 std::span<const Vec3> points,
                                 std::span<const double> upstream);

}  // namespace psr
