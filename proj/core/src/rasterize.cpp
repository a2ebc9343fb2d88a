#include "psr/rasterize.hpp"

#include <sstream>

namespace psr {

namespace {

TrilinearStencil stencil_for_point(const OrientedPointCloud& cloud,
                                   std::size_t i, const GridSpec& spec) {
  try {
    return trilinear_weights(cloud.positions[i], spec);
  } catch (const DomainError& e) {
    std::ostringstream msg;
    msg << "point " << i << ": " << e.what();
    throw DomainError(msg.str());
  }
}

}  // namespace

VectorGrid rasterize(const OrientedPointCloud& cloud, const GridSpec& spec) {
  if (cloud.positions.size() != cloud.normals.size()) {
    throw Error("rasterize: positions and normals must have equal length");
  }
  if (cloud.size() == 0) {
    throw Error("rasterize: empty point cloud");
  }
  VectorGrid v(spec);
  const Index n = spec.voxel_count();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const TrilinearStencil st = stencil_for_point(cloud, i, spec);
    const Vec3& nrm = cloud.normals[i];
    for (int k = 0; k < 8; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      const Index idx = st.corner[ks];
      const double w = st.weight[ks];
      v.values[static_cast<std::size_t>(idx)] += w * nrm.x();
      v.values[static_cast<std::size_t>(n + idx)] += w * nrm.y();
      v.values[static_cast<std::size_t>(2 * n + idx)] += w * nrm.z();
    }
  }
  return v;
}

RasterizeGrad rasterize_backward(const OrientedPointCloud& cloud,
                                 const GridSpec& spec,
                                 const VectorGrid& upstream) {
  if (upstream.spec != spec) {
    throw Error("rasterize_backward: upstream grid spec mismatch");
  }
  RasterizeGrad g;
  g.positions.assign(cloud.size(), Vec3::Zero());
  g.normals.assign(cloud.size(), Vec3::Zero());
  const Index n = spec.voxel_count();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const TrilinearStencil st = stencil_for_point(cloud, i, spec);
    const Vec3& nrm = cloud.normals[i];
    Vec3 gn = Vec3::Zero();
    Vec3 gp = Vec3::Zero();
    for (int k = 0; k < 8; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      const Index idx = st.corner[ks];
      const Vec3 up(upstream.values[static_cast<std::size_t>(idx)],
                    upstream.values[static_cast<std::size_t>(n + idx)],
                    upstream.values[static_cast<std::size_t>(2 * n + idx)]);
      gn += st.weight[ks] * up;
      gp += st.weight_grad[ks] * nrm.dot(up);
    }
    g.normals[i] = gn;
    g.positions[i] = gp;
  }
  return g;
}

}  // namespace psr
