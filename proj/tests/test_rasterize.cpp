#include <doctest.h>

#include <cmath>

#include "psr/rasterize.hpp"
#include "psr/rng.hpp"
#include "support/builders.hpp"
#include "support/finite_diff.hpp"

using namespace psr;

TEST_CASE("rasterize pulses") {
  const GridSpec spec(8);
  const double s = spec.voxel_size();

  SUBCASE("point on a vertex lands on that vertex") {
    OrientedPointCloud cloud;
    cloud.positions = {Vec3(3 * s, 4 * s, 5 * s)};
    cloud.normals = {Vec3(0, 0, 1)};
    const VectorGrid v = rasterize(cloud, spec);
    const Index j = spec.linear_index(3, 4, 5);
    CHECK(v.at(2, j) == doctest::Approx(1.0).epsilon(1e-15));
    double total = 0.0;
    for (double x : v.values) total += std::abs(x);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("coincident points with opposite normals cancel") {
    OrientedPointCloud cloud;
    cloud.positions = {Vec3(0.37, 0.21, 0.68), Vec3(0.37, 0.21, 0.68)};
    cloud.normals = {Vec3(0.3, -0.4, 0.5), Vec3(-0.3, 0.4, -0.5)};
    const VectorGrid v = rasterize(cloud, spec);
    for (double x : v.values) CHECK(x == doctest::Approx(0.0));
  }

  SUBCASE("cell center splits evenly over eight corners") {
    OrientedPointCloud cloud;
    cloud.positions = {Vec3(2.5 * s, 3.5 * s, 4.5 * s)};
    cloud.normals = {Vec3(1, 0, 0)};
    const VectorGrid v = rasterize(cloud, spec);
    for (int dz = 0; dz < 2; ++dz) {
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const Index j = spec.linear_index(2 + dx, 3 + dy, 4 + dz);
          CHECK(v.at(0, j) == doctest::Approx(0.125).epsilon(1e-14));
          CHECK(v.at(1, j) == doctest::Approx(0.0));
        }
      }
    }
  }

  SUBCASE("out-of-domain point names the offending index") {
    OrientedPointCloud cloud;
    cloud.positions = {Vec3(0.5, 0.5, 0.5), Vec3(0.5, 3.5, 0.5)};
    cloud.normals = {Vec3(0, 0, 1), Vec3(0, 0, 1)};
    try {
      rasterize(cloud, spec);
      FAIL("expected DomainError");
    } catch (const DomainError& e) {
      CHECK(std::string(e.what()).find("point 1") != std::string::npos);
    }
  }

  SUBCASE("empty cloud is an error") {
    OrientedPointCloud cloud;
    CHECK_THROWS_AS(rasterize(cloud, spec), Error);
  }
}

TEST_CASE("rasterize conservation and linearity") {
  const GridSpec spec(16);
  Rng rng(11);
  const OrientedPointCloud cloud = testing::random_cloud(rng, spec, 128);

  SUBCASE("componentwise sums are conserved") {
    const VectorGrid v = rasterize(cloud, spec);
    Vec3 grid_sum = Vec3::Zero();
    const Index n = spec.voxel_count();
    for (int c = 0; c < 3; ++c) {
      for (Index i = 0; i < n; ++i) grid_sum[c] += v.at(c, i);
    }
    Vec3 normal_sum = Vec3::Zero();
    for (const Vec3& nr : cloud.normals) normal_sum += nr;
    for (int c = 0; c < 3; ++c) {
      CHECK(grid_sum[c] ==
            doctest::Approx(normal_sum[c]).epsilon(1e-10));
    }
  }

  SUBCASE("linear in the normals") {
    OrientedPointCloud scaled = cloud;
    for (Vec3& nr : scaled.normals) nr *= 2.5;
    const VectorGrid v1 = rasterize(cloud, spec);
    const VectorGrid v2 = rasterize(scaled, spec);
    for (std::size_t i = 0; i < v1.values.size(); ++i) {
      CHECK(v2.values[i] == doctest::Approx(2.5 * v1.values[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("rasterize_backward") {
  const GridSpec spec(16);
  Rng rng(12);

  SUBCASE("zero upstream, zero gradients") {
    const OrientedPointCloud cloud = testing::random_cloud(rng, spec, 16);
    const VectorGrid upstream(spec);
    const RasterizeGrad g = rasterize_backward(cloud, spec, upstream);
    for (const Vec3& v : g.positions) CHECK(v.isZero(0.0));
    for (const Vec3& v : g.normals) CHECK(v.isZero(0.0));
  }

  SUBCASE("vertex point gathers the upstream value") {
    const double s = spec.voxel_size();
    OrientedPointCloud cloud;
    cloud.positions = {Vec3(3 * s, 4 * s, 5 * s)};
    cloud.normals = {Vec3(0.2, 0.4, 0.8)};
    VectorGrid upstream(spec);
    upstream.at(2, spec.linear_index(3, 4, 5)) = 1.0;  // e_z at the vertex
    const RasterizeGrad g = rasterize_backward(cloud, spec, upstream);
    CHECK(g.normals[0].x() == doctest::Approx(0.0));
    CHECK(g.normals[0].y() == doctest::Approx(0.0));
    CHECK(g.normals[0].z() == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(std::isfinite(g.positions[0].norm()));
  }

  SUBCASE("adjointness <rasterize(cloud), G> = <normals, grad_normals>") {
    const OrientedPointCloud cloud = testing::random_cloud(rng, spec, 64);
    const VectorGrid g_grid = testing::random_vector_grid(rng, spec);
    const VectorGrid v = rasterize(cloud, spec);
    double lhs = 0.0;
    for (std::size_t i = 0; i < v.values.size(); ++i) {
      lhs += v.values[i] * g_grid.values[i];
    }
    const RasterizeGrad g = rasterize_backward(cloud, spec, g_grid);
    double rhs = 0.0;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      rhs += cloud.normals[i].dot(g.normals[i]);
    }
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
  }

  SUBCASE("gradients match finite differences (N=32, r=16)") {
    OrientedPointCloud cloud = testing::random_cloud(rng, spec, 32);
    const VectorGrid weights = testing::random_vector_grid(rng, spec);
    const auto loss = [&]() {
      const VectorGrid v = rasterize(cloud, spec);
      double acc = 0.0;
      for (std::size_t i = 0; i < v.values.size(); ++i) {
        acc += v.values[i] * weights.values[i];
      }
      return acc;
    };
    const RasterizeGrad g = rasterize_backward(cloud, spec, weights);
    const auto fd_pos = testing::fd_check_points(cloud.positions, loss, g.positions);
    CHECK(fd_pos.rel_error() < 1e-6);
    const auto fd_nrm = testing::fd_check_points(cloud.normals, loss, g.normals);
    CHECK(fd_nrm.rel_error() < 1e-6);
  }

  SUBCASE("spec mismatch rejected") {
    const OrientedPointCloud cloud = testing::random_cloud(rng, spec, 4);
    const VectorGrid upstream(GridSpec(8));
    CHECK_THROWS_AS(rasterize_backward(cloud, spec, upstream), Error);
  }
}
