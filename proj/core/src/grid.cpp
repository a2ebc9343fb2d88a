#include "psr/grid.hpp"

#include <cmath>
#include <sstream>

namespace psr {

GridSpec::GridSpec(int resolution) : r_(resolution) {
  if (resolution < 4 || resolution % 2 != 0) {
    std::ostringstream msg;
    msg << "grid resolution must be even and >= 4, got " << resolution;
    throw Error(msg.str());
  }
}

FrequencyGrid::FrequencyGrid(const GridSpec& spec) : spec_(spec) {
  const int r = spec.resolution();
  wavenumbers_.resize(static_cast<std::size_t>(r));
  for (int j = 0; j < r; ++j) {
    wavenumbers_[static_cast<std::size_t>(j)] = j < r / 2 ? j : j - r;
  }
}

FrequencyGrid frequency_grid(const GridSpec& spec) {
  return FrequencyGrid(spec);
}

Vec3 wrap_point(const Vec3& p) {
  Vec3 q = p;
  for (int a = 0; a < 3; ++a) {
    if (q[a] < 0.0 && q[a] >= -1.0) q[a] += 1.0;
    else if (q[a] >= 1.0 && q[a] < 2.0) q[a] -= 1.0;
    if (!(q[a] >= 0.0 && q[a] < 1.0)) {
      std::ostringstream msg;
      msg << "point (" << p.x() << ", " << p.y() << ", " << p.z()
          << ") outside [0,1)^3 beyond a single periodic wrap";
      throw DomainError(msg.str());
    }
  }
  return q;
}

TrilinearStencil trilinear_weights(const Vec3& p, const GridSpec& spec) {
  const Vec3 q = wrap_point(p);
  const int r = spec.resolution();
  const double rd = static_cast<double>(r);

  int cell[3];
  double frac[3];
  for (int a = 0; a < 3; ++a) {
    double scaled = q[a] * rd;
    int c = static_cast<int>(scaled);
    if (c >= r) c = r - 1;  // guards q*r rounding up to r
    cell[a] = c;
    frac[a] = scaled - c;
  }

  TrilinearStencil st;
  for (int k = 0; k < 8; ++k) {
    const int bx = k & 1, by = (k >> 1) & 1, bz = (k >> 2) & 1;
    const int x = (cell[0] + bx) % r;
    const int y = (cell[1] + by) % r;
    const int z = (cell[2] + bz) % r;
    st.corner[static_cast<std::size_t>(k)] = spec.linear_index(x, y, z);

    const double wx = bx ? frac[0] : 1.0 - frac[0];
    const double wy = by ? frac[1] : 1.0 - frac[1];
    const double wz = bz ? frac[2] : 1.0 - frac[2];
    st.weight[static_cast<std::size_t>(k)] = wx * wy * wz;
    st.weight_grad[static_cast<std::size_t>(k)] =
        Vec3((bx ? rd : -rd) * wy * wz,
             (by ? rd : -rd) * wx * wz,
             (bz ? rd : -rd) * wx * wy);
  }
  return st;
}

std::vector<double> sample_trilinear(const ScalarGrid& grid,
                                     std::span<const Vec3> points) {
  std::vector<double> out(points.size(), 0.0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const TrilinearStencil st = trilinear_weights(points[i], grid.spec);
    double v = 0.0;
    for (int k = 0; k < 8; ++k) {
      v += st.weight[static_cast<std::size_t>(k)] *
           grid.values[static_cast<std::size_t>(st.corner[static_cast<std::size_t>(k)])];
    }
    out[i] = v;
  }
  return out;
}

SampleGrad sample_trilinear_grad(const ScalarGrid& grid,
                                 std::span<const Vec3> points,
                                 std::span<const double> upstream) {
  if (upstream.size() != points.size()) {
    throw Error("sample_trilinear_grad: upstream length must match points");
  }
  SampleGrad g{ScalarGrid(grid.spec), std::vector<Vec3>(points.size(), Vec3::Zero())};
  for (std::size_t i = 0; i < points.size(); ++i) {
    const TrilinearStencil st = trilinear_weights(points[i], grid.spec);
    Vec3 gp = Vec3::Zero();
    for (int k = 0; k < 8; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      const auto c = static_cast<std::size_t>(st.corner[ks]);
      g.grad_grid.values[c] += upstream[i] * st.weight[ks];
      gp += grid.values[c] * st.weight_grad[ks];
    }
    g.grad_points[i] = upstream[i] * gp;
  }
  return g;
}

}  // namespace psr
