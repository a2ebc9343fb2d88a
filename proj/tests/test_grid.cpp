#include <doctest.h>

#include <cmath>

#include "psr/grid.hpp"
#include "psr/rng.hpp"
#include "support/builders.hpp"
#include "support/finite_diff.hpp"

using namespace psr;

TEST_CASE("grid spec rejects odd or tiny resolutions") {
  CHECK_THROWS_AS(GridSpec(3), Error);
  CHECK_THROWS_AS(GridSpec(5), Error);
  CHECK_THROWS_AS(GridSpec(2), Error);
  CHECK_NOTHROW(GridSpec(4));
  CHECK(GridSpec(8).voxel_count() == 512);
}

TEST_CASE("linear index layout is x-fastest") {
  const GridSpec spec(8);
  CHECK(spec.linear_index(0, 0, 0) == 0);
  CHECK(spec.linear_index(1, 0, 0) == 1);
  CHECK(spec.linear_index(0, 1, 0) == 8);
  CHECK(spec.linear_index(0, 0, 1) == 64);
  const Vec3i c = spec.coords(spec.linear_index(3, 5, 7));
  CHECK(c.x() == 3);
  CHECK(c.y() == 5);
  CHECK(c.z() == 7);
}

TEST_CASE("frequency grid follows DFT ordering") {
  SUBCASE("r=4 wavenumbers") {
    const FrequencyGrid freq = frequency_grid(GridSpec(4));
    CHECK(freq.wavenumber(0) == 0);
    CHECK(freq.wavenumber(1) == 1);
    CHECK(freq.wavenumber(2) == -2);
    CHECK(freq.wavenumber(3) == -1);
  }
  SUBCASE("index 0 is the zero mode") {
    const FrequencyGrid freq = frequency_grid(GridSpec(8));
    CHECK(freq.wavenumbers_at(0) == Vec3i(0, 0, 0));
    CHECK(freq.norm_sq(0) == 0.0);
  }
  SUBCASE("r=8 corner frequency") {
    const GridSpec spec(8);
    const FrequencyGrid freq = frequency_grid(spec);
    double max_norm = 0.0;
    int zero_count = 0;
    for (Index i = 0; i < spec.voxel_count(); ++i) {
      max_norm = std::max(max_norm, freq.norm_sq(i));
      if (freq.wavenumbers_at(i) == Vec3i(0, 0, 0)) ++zero_count;
      if (freq.norm_sq(i) == 0.0) CHECK(i == 0);
    }
    CHECK(max_norm == 48.0);  // 3 * (r/2)^2
    CHECK(zero_count == 1);
  }
}

TEST_CASE("trilinear weights") {
  const GridSpec spec(8);
  const double s = spec.voxel_size();

  SUBCASE("point on a grid vertex") {
    const TrilinearStencil st = trilinear_weights(Vec3(3 * s, 2 * s, 5 * s), spec);
    CHECK(st.weight[0] == doctest::Approx(1.0).epsilon(1e-15));
    for (int k = 1; k < 8; ++k) {
      CHECK(st.weight[static_cast<std::size_t>(k)] == doctest::Approx(0.0));
    }
    CHECK(st.corner[0] == spec.linear_index(3, 2, 5));
  }

  SUBCASE("point at a cell center") {
    const TrilinearStencil st =
        trilinear_weights(Vec3(3.5 * s, 2.5 * s, 5.5 * s), spec);
    for (int k = 0; k < 8; ++k) {
      CHECK(st.weight[static_cast<std::size_t>(k)] == doctest::Approx(0.125).epsilon(1e-14));
    }
  }

  SUBCASE("quarter offset along x") {
    const TrilinearStencil st =
        trilinear_weights(Vec3(3.25 * s, 2 * s, 5 * s), spec);
    CHECK(st.weight[0] == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(st.weight[1] == doctest::Approx(0.25).epsilon(1e-14));
    for (int k = 2; k < 8; ++k) {
      CHECK(st.weight[static_cast<std::size_t>(k)] == doctest::Approx(0.0));
    }
  }

  SUBCASE("periodic wrap of the upper neighbors") {
    const TrilinearStencil st =
        trilinear_weights(Vec3(1.0 - 0.25 * s, 0.0, 0.0), spec);
    // Cell (7,0,0); upper x-corner wraps to x=0.
    CHECK(st.corner[0] == spec.linear_index(7, 0, 0));
    CHECK(st.corner[1] == spec.linear_index(0, 0, 0));
    CHECK(st.weight[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(st.weight[1] == doctest::Approx(0.75).epsilon(1e-12));
  }

  SUBCASE("single periodic wrap accepted, more rejected") {
    CHECK_NOTHROW(trilinear_weights(Vec3(-0.25, 0.5, 0.5), spec));
    CHECK_NOTHROW(trilinear_weights(Vec3(1.25, 0.5, 0.5), spec));
    CHECK_THROWS_AS(trilinear_weights(Vec3(2.5, 0.5, 0.5), spec), DomainError);
    CHECK_THROWS_AS(trilinear_weights(Vec3(0.5, -1.5, 0.5), spec), DomainError);
  }
}

TEST_CASE("partition of unity over random points") {
  const GridSpec spec(16);
  Rng rng(42);
  for (int i = 0; i < 10000; ++i) {
    const Vec3 p(rng.uniform(), rng.uniform(), rng.uniform());
    const TrilinearStencil st = trilinear_weights(p, spec);
    double sum = 0.0;
    for (double w : st.weight) {
      CHECK(w >= 0.0);
      sum += w;
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("sample_trilinear") {
  const GridSpec spec(8);

  SUBCASE("constant grid samples to the constant") {
    ScalarGrid grid(spec);
    for (double& v : grid.values) v = 2.75;
    Rng rng(1);
    std::vector<Vec3> points;
    for (int i = 0; i < 32; ++i) {
      points.emplace_back(rng.uniform(), rng.uniform(), rng.uniform());
    }
    for (double v : sample_trilinear(grid, points)) {
      CHECK(v == doctest::Approx(2.75).epsilon(1e-14));
    }
  }

  SUBCASE("vertex sample returns the grid value") {
    Rng rng(2);
    ScalarGrid grid = testing::random_scalar_grid(rng, spec);
    const double s = spec.voxel_size();
    const std::vector<Vec3> points = {Vec3(4 * s, 1 * s, 6 * s)};
    const auto out = sample_trilinear(grid, points);
    CHECK(out[0] == doctest::Approx(grid.at(4, 1, 6)).epsilon(1e-15));
  }

  SUBCASE("linear ramp reproduced inside a cell") {
    ScalarGrid grid(spec);
    const int r = spec.resolution();
    for (int z = 0; z < r; ++z) {
      for (int y = 0; y < r; ++y) {
        for (int x = 0; x < r; ++x) {
          grid.at(x, y, z) = spec.node_position(x, y, z).x();
        }
      }
    }
    // Mid-cell away from the periodic seam: value equals the coordinate.
    const std::vector<Vec3> points = {Vec3(0.4375, 0.3125, 0.5625)};
    const auto out = sample_trilinear(grid, points);
    CHECK(out[0] == doctest::Approx(0.4375).epsilon(1e-14));
  }

  SUBCASE("periodicity: p and p+1 sample identically") {
    Rng rng(3);
    ScalarGrid grid = testing::random_scalar_grid(rng, spec);
    // Dyadic coordinates so the periodic wrap is exact in floating point.
    const std::vector<Vec3> a = {Vec3(0.28125, 0.625, 0.90625)};
    const std::vector<Vec3> b = {Vec3(1.28125, 0.625, 0.90625)};
    CHECK(sample_trilinear(grid, a)[0] == sample_trilinear(grid, b)[0]);

    const std::vector<Vec3> c = {Vec3(0.3, 0.62, 0.91)};
    const std::vector<Vec3> d = {Vec3(1.3, 0.62, 0.91)};
    CHECK(sample_trilinear(grid, c)[0] ==
          doctest::Approx(sample_trilinear(grid, d)[0]).epsilon(1e-12));
  }
}

TEST_CASE("sample_trilinear_grad") {
  const GridSpec spec(8);
  Rng rng(5);
  ScalarGrid grid = testing::random_scalar_grid(rng, spec);

  SUBCASE("zero upstream gives zero gradients") {
    std::vector<Vec3> points = testing::cell_interior_points(rng, spec, 8);
    std::vector<double> upstream(points.size(), 0.0);
    const SampleGrad g = sample_trilinear_grad(grid, points, upstream);
    for (double v : g.grad_grid.values) CHECK(v == 0.0);
    for (const Vec3& v : g.grad_points) CHECK(v.isZero(0.0));
  }

  SUBCASE("vertex point scatters upstream to that vertex only") {
    const double s = spec.voxel_size();
    std::vector<Vec3> points = {Vec3(2 * s, 3 * s, 4 * s)};
    std::vector<double> upstream = {1.0};
    const SampleGrad g = sample_trilinear_grad(grid, points, upstream);
    double total = 0.0;
    for (double v : g.grad_grid.values) total += std::abs(v);
    CHECK(g.grad_grid.at(2, 3, 4) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("point gradient matches central finite differences") {
    std::vector<Vec3> points = testing::cell_interior_points(rng, spec, 16);
    std::vector<double> upstream;
    for (std::size_t i = 0; i < points.size(); ++i) {
      upstream.push_back(rng.uniform(-1, 1));
    }
    const SampleGrad g = sample_trilinear_grad(grid, points, upstream);
    const auto loss = [&]() {
      const auto sampled = sample_trilinear(grid, points);
      double acc = 0.0;
      for (std::size_t i = 0; i < sampled.size(); ++i) acc += sampled[i] * upstream[i];
      return acc;
    };
    const auto fd = testing::fd_check_points(points, loss, g.grad_points);
    CHECK(fd.rel_error() < 1e-6);
  }

  SUBCASE("upstream length mismatch is an error") {
    std::vector<Vec3> points = testing::cell_interior_points(rng, spec, 4);
    std::vector<double> upstream(3, 1.0);
    CHECK_THROWS_AS(sample_trilinear_grad(grid, points, upstream), Error);
  }
}

TEST_CASE("scatter/gather adjointness") {
  // <scatter(a), b> == <a, gather(b)> for random inputs.
  const GridSpec spec(8);
  Rng rng(6);
  ScalarGrid b = testing::random_scalar_grid(rng, spec);
  std::vector<Vec3> points = testing::cell_interior_points(rng, spec, 64);
  std::vector<double> a;
  for (std::size_t i = 0; i < points.size(); ++i) a.push_back(rng.uniform(-1, 1));

  const SampleGrad scatter = sample_trilinear_grad(b, points, a);
  double lhs = 0.0;
  for (std::size_t i = 0; i < b.values.size(); ++i) {
    lhs += scatter.grad_grid.values[i] * b.values[i];
  }
  const auto gathered = sample_trilinear(b, points);
  double rhs = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) rhs += a[i] * gathered[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}
