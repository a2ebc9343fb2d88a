#pragma once

#include <span>
#include <vector>

#include "psr/grid.hpp"

namespace psr {

/// Points with (non-unit) normals in the unit cube. Normal magnitude scales
/// a point's contribution to the rasterized field, so it acts as a
/// per-point confidence and is never forced to unit length.
struct OrientedPointCloud {
  std::vector<Vec3> positions;  // in [0,1)^3
  std::vector<Vec3> normals;

  std::size_t size() const { return positions.size(); }
};

/// Scatters each point's normal onto the 8 enclosing grid nodes with
/// trilinear weights. The weights form a partition of unity, so the
/// componentwise sum over the grid equals the sum of the input normals.
/// O(N) time, O(grid) space.
VectorGrid rasterize(const OrientedPointCloud& cloud, const GridSpec& spec);

struct RasterizeGrad {
  std::vector<Vec3> positions;
  std::vector<Vec3> normals;
};

/// Exact adjoint of rasterize. grad_normals gathers `upstream` through the
/// same weights; grad_positions contracts upstream with the one-sided
/// weight derivatives.
RasterizeGrad rasterize_backward(const OrientedPointCloud& cloud,
                                 const GridSpec& spec,
                                 const VectorGrid& upstream);

}  // namespace psr
