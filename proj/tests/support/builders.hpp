#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "psr/grid.hpp"
#include "psr/rasterize.hpp"
#include "psr/rng.hpp"

// Seeded input builders shared by the unit and acceptance suites.

namespace psr::testing {

/// Points strictly inside grid cells (fraction in [margin, 1-margin]) so
/// finite-difference probes stay within one cell.
inline std::vector<Vec3> cell_interior_points(Rng& rng, const GridSpec& spec,
                                              std::size_t count,
                                              double margin = 0.05) {
  std::vector<Vec3> points;
  points.reserve(count);
  const int r = spec.resolution();
  for (std::size_t i = 0; i < count; ++i) {
    Vec3 p;
    for (int a = 0; a < 3; ++a) {
      const auto cell = static_cast<double>(rng.index(static_cast<std::uint64_t>(r)));
      p[a] = (cell + rng.uniform(margin, 1.0 - margin)) / r;
    }
    points.push_back(p);
  }
  return points;
}

inline OrientedPointCloud random_cloud(Rng& rng, const GridSpec& spec,
                                       std::size_t count) {
  OrientedPointCloud cloud;
  cloud.positions = cell_interior_points(rng, spec, count);
  cloud.normals.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    cloud.normals.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1),
                               rng.uniform(-1, 1));
  }
  return cloud;
}

inline VectorGrid random_vector_grid(Rng& rng, const GridSpec& spec) {
  VectorGrid v(spec);
  for (double& x : v.values) x = rng.uniform(-1.0, 1.0);
  return v;
}

inline ScalarGrid random_scalar_grid(Rng& rng, const GridSpec& spec) {
  ScalarGrid g(spec);
  for (double& x : g.values) x = rng.uniform(-1.0, 1.0);
  return g;
}

/// Outward-oriented sphere cloud (area-uniform).
inline OrientedPointCloud sphere_cloud(std::size_t count, double radius,
                                       const Vec3& center, std::uint64_t seed) {
  Rng rng(seed);
  OrientedPointCloud cloud;
  for (std::size_t i = 0; i < count; ++i) {
    const double ct = 1.0 - 2.0 * rng.uniform();
    const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
    const double phi = 2.0 * std::numbers::pi * rng.uniform();
    const Vec3 dir(st * std::cos(phi), st * std::sin(phi), ct);
    cloud.positions.push_back(center + radius * dir);
    cloud.normals.push_back(dir);
  }
  return cloud;
}

/// Signed distance of a sphere sampled on the grid.
inline ScalarGrid sphere_sdf(const GridSpec& spec, double radius,
                             const Vec3& center) {
  ScalarGrid g(spec);
  const int r = spec.resolution();
  for (int z = 0; z < r; ++z) {
    for (int y = 0; y < r; ++y) {
      for (int x = 0; x < r; ++x) {
        const Vec3 p = spec.node_position(x, y, z);
        g.at(x, y, z) = (p - center).norm() - radius;
      }
    }
  }
  return g;
}

/// Area-uniform samples of a torus around the z axis (major radius R,
/// tube radius rho) centered at `center`, with optional Gaussian noise.
inline std::vector<Vec3> torus_points(std::size_t count, double major,
                                      double minor, const Vec3& center,
                                      std::uint64_t seed,
                                      double noise_sigma = 0.0) {
  Rng rng(seed);
  std::vector<Vec3> points;
  points.reserve(count);
  while (points.size() < count) {
    const double u = 2.0 * std::numbers::pi * rng.uniform();
    const double v = 2.0 * std::numbers::pi * rng.uniform();
    // Area element is proportional to (R + rho cos v); rejection-sample v.
    if (rng.uniform() >
        (major + minor * std::cos(v)) / (major + minor)) {
      continue;
    }
    Vec3 p(center.x() + (major + minor * std::cos(v)) * std::cos(u),
           center.y() + (major + minor * std::cos(v)) * std::sin(u),
           center.z() + minor * std::sin(v));
    if (noise_sigma > 0.0) {
      p += noise_sigma * Vec3(rng.normal(), rng.normal(), rng.normal());
    }
    points.push_back(p);
  }
  return points;
}

}  // namespace psr::testing
