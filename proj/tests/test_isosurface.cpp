#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include <Eigen/Geometry>

#include "psr/isosurface.hpp"
#include "psr/rng.hpp"
#include "support/builders.hpp"

using namespace psr;

namespace {

// Trilinear re-evaluation used to check that mesh vertices sit on the zero
// set of the per-edge linear model.
double resample_at(const ScalarGrid& grid, const Vec3& p) {
  return sample_trilinear(grid, std::vector<Vec3>{p})[0];
}

}  // namespace

TEST_CASE("marching_cubes trivial grids") {
  const GridSpec spec(8);

  SUBCASE("all positive gives an empty mesh") {
    ScalarGrid chi(spec);
    for (double& v : chi.values) v = 1.0;
    CHECK(marching_cubes(chi).empty());
  }

  SUBCASE("all negative gives an empty mesh") {
    ScalarGrid chi(spec);
    for (double& v : chi.values) v = -2.0;
    CHECK(marching_cubes(chi).empty());
  }

  SUBCASE("one negative interior node produces a closed pocket") {
    ScalarGrid chi(spec);
    for (double& v : chi.values) v = 1.0;
    chi.at(4, 4, 4) = -1.0;
    const TriangleMesh mesh = marching_cubes(chi);
    // One corner flips in each of the 8 cells around the node: one
    // triangle per cell (case with a single inside corner).
    CHECK(mesh.triangles.size() == 8);
    const MeshTopology topo = analyze_topology(mesh);
    CHECK(topo.watertight());
    CHECK(topo.consistently_oriented);
    CHECK(topo.euler_characteristic() == 2);
    // Normals point toward chi > 0: away from the negative node.
    const Vec3 center = spec.node_position(4, 4, 4);
    for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
      const auto& t = mesh.triangles[f];
      const Vec3 centroid =
          (mesh.vertices[static_cast<std::size_t>(t[0])] +
           mesh.vertices[static_cast<std::size_t>(t[1])] +
           mesh.vertices[static_cast<std::size_t>(t[2])]) /
          3.0;
      CHECK(mesh.face_normals[f].dot(centroid - center) > 0.0);
    }
  }

  SUBCASE("single negative corner in one cell yields one triangle there") {
    ScalarGrid chi(spec);
    for (double& v : chi.values) v = 1.0;
    chi.at(0, 0, 0) = -1.0;  // grid corner: only one incident cell
    const TriangleMesh mesh = marching_cubes(chi);
    CHECK(mesh.triangles.size() == 1);
    CHECK(mesh.vertices.size() == 3);
  }
}

TEST_CASE("marching_cubes sphere") {
  const GridSpec spec(32);
  const ScalarGrid chi = testing::sphere_sdf(spec, 0.3, Vec3::Constant(0.5));
  const TriangleMesh mesh = marching_cubes(chi);
  REQUIRE(!mesh.empty());

  SUBCASE("watertight genus-0 surface") {
    const MeshTopology topo = analyze_topology(mesh);
    CHECK(topo.boundary_edge_count == 0);
    CHECK(topo.non_manifold_edge_count == 0);
    CHECK(topo.consistently_oriented);
    CHECK(topo.component_count == 1);
    CHECK(topo.euler_characteristic() == 2);
  }

  SUBCASE("vertices lie near the sphere and on the grid zero set") {
    double max_residual = 0.0, max_chi = 0.0;
    for (double v : chi.values) max_chi = std::max(max_chi, std::abs(v));
    for (const Vec3& v : mesh.vertices) {
      const double radial = std::abs((v - Vec3::Constant(0.5)).norm() - 0.3);
      CHECK(radial < 0.01);  // within a voxel of the true surface
      max_residual = std::max(max_residual, std::abs(resample_at(chi, v)));
    }
    CHECK(max_residual < 1e-6 * max_chi);
  }

  SUBCASE("normals point outward") {
    for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
      const auto& t = mesh.triangles[f];
      const Vec3 centroid =
          (mesh.vertices[static_cast<std::size_t>(t[0])] +
           mesh.vertices[static_cast<std::size_t>(t[1])] +
           mesh.vertices[static_cast<std::size_t>(t[2])]) /
          3.0;
      CHECK(mesh.face_normals[f].dot(centroid - Vec3::Constant(0.5)) > 0.0);
    }
  }

  SUBCASE("no degenerate triangles") {
    for (const auto& t : mesh.triangles) {
      const Vec3& a = mesh.vertices[static_cast<std::size_t>(t[0])];
      const Vec3& b = mesh.vertices[static_cast<std::size_t>(t[1])];
      const Vec3& c = mesh.vertices[static_cast<std::size_t>(t[2])];
      CHECK(0.5 * (b - a).cross(c - a).norm() > 1e-12);
    }
  }
}

TEST_CASE("marching_cubes is watertight and oriented on random smooth fields") {
  // Sharp table check: any broken case produces boundary edges quickly.
  Rng rng(77);
  for (int trial = 0; trial < 24; ++trial) {
    const GridSpec spec(trial % 3 == 0 ? 8 : trial % 3 == 1 ? 12 : 16);
    ScalarGrid chi(spec);
    // Smooth random field: a few random low-frequency cosine modes.
    struct Mode {
      double ax, ay, az, phase, amp;
    };
    std::vector<Mode> modes;
    for (int m = 0; m < 6; ++m) {
      modes.push_back({std::floor(rng.uniform(0, 3.999)),
                       std::floor(rng.uniform(0, 3.999)),
                       std::floor(rng.uniform(0, 3.999)),
                       rng.uniform(0, 6.28), rng.uniform(0.3, 1.0)});
    }
    const int r = spec.resolution();
    for (int z = 0; z < r; ++z) {
      for (int y = 0; y < r; ++y) {
        for (int x = 0; x < r; ++x) {
          double v = -0.05;
          for (const Mode& md : modes) {
            v += md.amp * std::cos(2.0 * std::numbers::pi *
                                       (md.ax * x + md.ay * y + md.az * z) / r +
                                   md.phase);
          }
          chi.at(x, y, z) = v;
        }
      }
    }
    // Close the level set inside the lattice by padding the boundary nodes
    // positive, so watertightness is well defined.
    for (int z = 0; z < r; ++z) {
      for (int y = 0; y < r; ++y) {
        for (int x = 0; x < r; ++x) {
          if (x == 0 || y == 0 || z == 0 || x == r - 1 || y == r - 1 ||
              z == r - 1) {
            chi.at(x, y, z) = 1.0;
          }
        }
      }
    }
    const TriangleMesh mesh = marching_cubes(chi);
    if (mesh.empty()) continue;
    const MeshTopology topo = analyze_topology(mesh);
    CHECK(topo.boundary_edge_count == 0);
    CHECK(topo.non_manifold_edge_count == 0);
    CHECK(topo.consistently_oriented);
  }
}

TEST_CASE("largest_component") {
  const GridSpec spec(32);

  SUBCASE("single component is returned unchanged") {
    const ScalarGrid chi = testing::sphere_sdf(spec, 0.25, Vec3::Constant(0.5));
    const TriangleMesh mesh = marching_cubes(chi);
    const TriangleMesh filtered = largest_component(mesh);
    CHECK(filtered.triangles.size() == mesh.triangles.size());
    CHECK(filtered.vertices.size() == mesh.vertices.size());
    CHECK(filtered.area() == doctest::Approx(mesh.area()).epsilon(1e-12));
  }

  SUBCASE("keeps the larger of two spheres") {
    ScalarGrid big = testing::sphere_sdf(spec, 0.2, Vec3(0.3, 0.3, 0.3));
    const ScalarGrid small = testing::sphere_sdf(spec, 0.1, Vec3(0.75, 0.75, 0.75));
    ScalarGrid combined(spec);
    for (std::size_t i = 0; i < combined.values.size(); ++i) {
      combined.values[i] = std::min(big.values[i], small.values[i]);
    }
    const TriangleMesh mesh = marching_cubes(combined);
    const MeshTopology before = analyze_topology(mesh);
    CHECK(before.component_count == 2);

    const TriangleMesh filtered = largest_component(mesh);
    const MeshTopology after = analyze_topology(filtered);
    CHECK(after.component_count == 1);
    // Every surviving vertex belongs to the big sphere.
    for (const Vec3& v : filtered.vertices) {
      CHECK((v - Vec3(0.3, 0.3, 0.3)).norm() < 0.25);
    }
  }

  SUBCASE("empty in, empty out") {
    CHECK(largest_component(TriangleMesh{}).empty());
  }
}

TEST_CASE("sample_surface") {
  SUBCASE("single triangle: all samples on it with its normal") {
    TriangleMesh mesh;
    mesh.vertices = {Vec3(0.1, 0.1, 0.5), Vec3(0.6, 0.1, 0.5),
                     Vec3(0.1, 0.7, 0.5)};
    mesh.triangles = {{0, 1, 2}};
    mesh.update_normals();
    const SurfaceSamples s = sample_surface(mesh, 500, 9);
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      CHECK(s.triangle[i] == 0);
      CHECK(s.points[i].z() == doctest::Approx(0.5));
      CHECK(s.normals[i].isApprox(Vec3(0, 0, 1), 1e-12));
      // Inside the triangle (barycentric residual).
      const double u = (s.points[i].x() - 0.1) / 0.5;
      const double v = (s.points[i].y() - 0.1) / 0.6;
      CHECK(u >= -1e-9);
      CHECK(v >= -1e-9);
      CHECK(u + v <= 1.0 + 1e-9);
    }
  }

  SUBCASE("areas 3:1 split samples 3:1 (chi-squared)") {
    TriangleMesh mesh;
    mesh.vertices = {Vec3(0.1, 0.1, 0.2), Vec3(0.7, 0.1, 0.2), Vec3(0.1, 0.7, 0.2),
                     Vec3(0.1, 0.1, 0.8), Vec3(0.4, 0.1, 0.8), Vec3(0.1, 0.4, 0.8)};
    // Legs 0.6 vs 0.3: areas 0.18 vs 0.045, ratio 4:1... use 3:1 by scaling:
    mesh.vertices[4] = Vec3(0.1 + 0.6 / std::sqrt(3.0), 0.1, 0.8);
    mesh.vertices[5] = Vec3(0.1, 0.1 + 0.6 / std::sqrt(3.0), 0.8);
    mesh.triangles = {{0, 1, 2}, {3, 4, 5}};
    mesh.update_normals();

    const std::size_t m = 10000;
    const SurfaceSamples s = sample_surface(mesh, m, 123);
    std::size_t count0 = 0;
    for (int t : s.triangle) count0 += t == 0 ? 1 : 0;
    const double expected0 = 0.75 * static_cast<double>(m);
    const double expected1 = 0.25 * static_cast<double>(m);
    const double observed0 = static_cast<double>(count0);
    const double observed1 = static_cast<double>(m - count0);
    const double chi_sq = (observed0 - expected0) * (observed0 - expected0) / expected0 +
                          (observed1 - expected1) * (observed1 - expected1) / expected1;
    // 1 dof: p > 0.01 corresponds to chi^2 < 6.635.
    CHECK(chi_sq < 6.635);
  }

  SUBCASE("deterministic per seed") {
    const GridSpec spec(16);
    const ScalarGrid chi = testing::sphere_sdf(spec, 0.3, Vec3::Constant(0.5));
    const TriangleMesh mesh = marching_cubes(chi);
    const SurfaceSamples a = sample_surface(mesh, 257, 4242);
    const SurfaceSamples b = sample_surface(mesh, 257, 4242);
    REQUIRE(a.points.size() == b.points.size());
    for (std::size_t i = 0; i < a.points.size(); ++i) {
      CHECK(a.points[i] == b.points[i]);  // bit-identical
      CHECK(a.triangle[i] == b.triangle[i]);
    }
    const SurfaceSamples c = sample_surface(mesh, 257, 4243);
    bool any_different = false;
    for (std::size_t i = 0; i < a.points.size(); ++i) {
      if (a.points[i] != c.points[i]) any_different = true;
    }
    CHECK(any_different);
  }

  SUBCASE("empty mesh is an error") {
    CHECK_THROWS_AS(sample_surface(TriangleMesh{}, 10, 1), Error);
  }

  SUBCASE("empirical area density is uniform (Kolmogorov-Smirnov)") {
    const GridSpec spec(16);
    const ScalarGrid chi = testing::sphere_sdf(spec, 0.3, Vec3::Constant(0.5));
    const TriangleMesh mesh = marching_cubes(chi);
    const std::size_t m = 100000;
    const SurfaceSamples s = sample_surface(mesh, m, 31337);

    std::vector<double> cumulative(mesh.triangles.size() + 1, 0.0);
    for (std::size_t f = 0; f < mesh.triangles.size(); ++f) {
      const auto& t = mesh.triangles[f];
      const Vec3& a = mesh.vertices[static_cast<std::size_t>(t[0])];
      const Vec3& b = mesh.vertices[static_cast<std::size_t>(t[1])];
      const Vec3& c = mesh.vertices[static_cast<std::size_t>(t[2])];
      cumulative[f + 1] = cumulative[f] + 0.5 * (b - a).cross(c - a).norm();
    }
    const double total = cumulative.back();

    // Each sample maps to the area coordinate of its triangle, spread
    // uniformly within it by an independent stream; under the null the
    // coordinates are Uniform(0,1).
    Rng spread(999);
    std::vector<double> coords;
    coords.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
      const auto f = static_cast<std::size_t>(s.triangle[i]);
      coords.push_back((cumulative[f] +
                        spread.uniform() * (cumulative[f + 1] - cumulative[f])) /
                       total);
    }
    std::sort(coords.begin(), coords.end());
    double ks = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double ecdf_hi = static_cast<double>(i + 1) / static_cast<double>(m);
      const double ecdf_lo = static_cast<double>(i) / static_cast<double>(m);
      ks = std::max(ks, std::max(std::abs(ecdf_hi - coords[i]),
                                 std::abs(coords[i] - ecdf_lo)));
    }
    // alpha = 0.01 critical value 1.63 / sqrt(m).
    CHECK(ks < 1.63 / std::sqrt(static_cast<double>(m)));
  }
}

TEST_CASE("mesh_grad_to_grid") {
  const GridSpec spec(16);

  SUBCASE("gradients orthogonal to normals vanish") {
    SurfaceSamples s;
    s.points = {Vec3(0.31, 0.42, 0.53), Vec3(0.6, 0.6, 0.6)};
    s.normals = {Vec3(0, 0, 1), Vec3(1, 0, 0)};
    s.triangle = {0, 0};
    const std::vector<Vec3> grads = {Vec3(0.5, -0.25, 0), Vec3(0, 0.7, -0.2)};
    const ScalarGrid grid = mesh_grad_to_grid(s, grads, spec);
    for (double v : grid.values) CHECK(v == doctest::Approx(0.0));
  }

  SUBCASE("sample on a vertex with dL/dp = -n scatters +1") {
    const double s_len = spec.voxel_size();
    SurfaceSamples s;
    s.points = {Vec3(3 * s_len, 7 * s_len, 2 * s_len)};
    s.normals = {Vec3(0, 0, 1)};
    s.triangle = {0};
    const std::vector<Vec3> grads = {Vec3(0, 0, -1)};
    const ScalarGrid grid = mesh_grad_to_grid(s, grads, spec);
    CHECK(grid.at(3, 7, 2) == doctest::Approx(1.0).epsilon(1e-15));
    double total = 0.0;
    for (double v : grid.values) total += std::abs(v);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("size mismatch rejected") {
    SurfaceSamples s;
    s.points = {Vec3(0.5, 0.5, 0.5)};
    s.normals = {Vec3(0, 0, 1)};
    s.triangle = {0};
    const std::vector<Vec3> grads(2, Vec3::Zero());
    CHECK_THROWS_AS(mesh_grad_to_grid(s, grads, spec), Error);
  }

  SUBCASE("one explicit descent step inflates a sphere") {
    // Loss pulling samples outward: dL/dp = -(p - c)/|p - c| so the induced
    // update on chi moves the level set outward.
    const GridSpec grid_spec(32);
    ScalarGrid chi = testing::sphere_sdf(grid_spec, 0.25, Vec3::Constant(0.5));
    const TriangleMesh before = marching_cubes(chi);
    const SurfaceSamples samples = sample_surface(before, 20000, 5);

    std::vector<Vec3> grads;
    grads.reserve(samples.points.size());
    for (const Vec3& p : samples.points) {
      grads.push_back(-(p - Vec3::Constant(0.5)).normalized());
    }
    const ScalarGrid dchi = mesh_grad_to_grid(samples, grads, grid_spec);

    ScalarGrid updated = chi;
    const double step = 1e-3;
    for (std::size_t i = 0; i < updated.values.size(); ++i) {
      updated.values[i] -= step * dchi.values[i];
    }
    const TriangleMesh after = marching_cubes(updated);
    REQUIRE(!after.empty());

    const auto mean_radius = [](const TriangleMesh& mesh) {
      double acc = 0.0;
      for (const Vec3& v : mesh.vertices) {
        acc += (v - Vec3::Constant(0.5)).norm();
      }
      return acc / static_cast<double>(mesh.vertices.size());
    };
    CHECK(mean_radius(after) > mean_radius(before));
  }
}
