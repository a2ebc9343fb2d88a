#include "psr/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "psr/grid.hpp"
#include "psr/metrics.hpp"
#include "psr/rng.hpp"
#include "psr/solver.hpp"

namespace psr {

namespace {

constexpr double kStep = 1e-6;

// Points kept well inside their cells so the finite-difference probes never
// cross a weight-derivative discontinuity at a cell face.
std::vector<Vec3> interior_points(Rng& rng, const GridSpec& spec,
                                  std::size_t count) {
  std::vector<Vec3> points;
  points.reserve(count);
  const int r = spec.resolution();
  for (std::size_t i = 0; i < count; ++i) {
    Vec3 p;
    for (int a = 0; a < 3; ++a) {
      const auto cell = static_cast<double>(rng.index(static_cast<std::uint64_t>(r)));
      p[a] = (cell + rng.uniform(0.05, 0.95)) / r;
    }
    points.push_back(p);
  }
  return points;
}

double relative_error(const std::vector<double>& analytic,
                      const std::vector<double>& fd) {
  double max_diff = 0.0, max_fd = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    max_diff = std::max(max_diff, std::abs(analytic[i] - fd[i]));
    max_fd = std::max(max_fd, std::abs(fd[i]));
  }
  return max_diff / std::max(max_fd, 1e-300);
}

// Central difference of a scalar function along every coordinate of a
// point list, compared against the analytic gradient.
double check_points_gradient(std::vector<Vec3>& points,
                             const std::function<double()>& value,
                             const std::vector<Vec3>& analytic) {
  std::vector<double> fd_flat, an_flat;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (int a = 0; a < 3; ++a) {
      const double saved = points[i][a];
      points[i][a] = saved + kStep;
      const double fp = value();
      points[i][a] = saved - kStep;
      const double fm = value();
      points[i][a] = saved;
      fd_flat.push_back((fp - fm) / (2.0 * kStep));
      an_flat.push_back(analytic[i][a]);
    }
  }
  return relative_error(an_flat, fd_flat);
}

GradCheckEntry check_sample(Rng& rng, int resolution) {
  const GridSpec spec(resolution);
  ScalarGrid grid(spec);
  for (double& v : grid.values) v = rng.uniform(-1.0, 1.0);
  std::vector<Vec3> points = interior_points(rng, spec, 24);
  std::vector<double> upstream(points.size());
  for (double& u : upstream) u = rng.uniform(-1.0, 1.0);

  const auto loss = [&]() {
    const auto sampled = sample_trilinear(grid, points);
    double acc = 0.0;
    for (std::size_t i = 0; i < sampled.size(); ++i) acc += sampled[i] * upstream[i];
    return acc;
  };
  const SampleGrad grad = sample_trilinear_grad(grid, points, upstream);
  const double err = check_points_gradient(points, loss, grad.grad_points);
  return {"sample_trilinear/points", resolution, err, 1e-6};
}

GradCheckEntry check_rasterize_positions(Rng& rng, int resolution) {
  const GridSpec spec(resolution);
  OrientedPointCloud cloud;
  cloud.positions = interior_points(rng, spec, 32);
  for (std::size_t i = 0; i < cloud.positions.size(); ++i) {
    cloud.normals.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1),
                               rng.uniform(-1, 1));
  }
  VectorGrid weights(spec);
  for (double& w : weights.values) w = rng.uniform(-1.0, 1.0);

  const auto loss = [&]() {
    const VectorGrid v = rasterize(cloud, spec);
    double acc = 0.0;
    for (std::size_t i = 0; i < v.values.size(); ++i) acc += v.values[i] * weights.values[i];
    return acc;
  };
  const RasterizeGrad grad = rasterize_backward(cloud, spec, weights);
  const double err = check_points_gradient(cloud.positions, loss, grad.positions);
  return {"rasterize/positions", resolution, err, 1e-6};
}

GradCheckEntry check_rasterize_normals(Rng& rng, int resolution) {
  const GridSpec spec(resolution);
  OrientedPointCloud cloud;
  cloud.positions = interior_points(rng, spec, 32);
  for (std::size_t i = 0; i < cloud.positions.size(); ++i) {
    cloud.normals.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1),
                               rng.uniform(-1, 1));
  }
  VectorGrid weights(spec);
  for (double& w : weights.values) w = rng.uniform(-1.0, 1.0);

  const auto loss = [&]() {
    const VectorGrid v = rasterize(cloud, spec);
    double acc = 0.0;
    for (std::size_t i = 0; i < v.values.size(); ++i) acc += v.values[i] * weights.values[i];
    return acc;
  };
  const RasterizeGrad grad = rasterize_backward(cloud, spec, weights);
  const double err = check_points_gradient(cloud.normals, loss, grad.normals);
  return {"rasterize/normals", resolution, err, 1e-6};
}

std::pair<GradCheckEntry, GradCheckEntry> check_solver(Rng& rng, int resolution) {
  const GridSpec spec(resolution);
  SolverParams params;
  params.sigma = 1.0;

  OrientedPointCloud cloud;
  cloud.positions = interior_points(rng, spec, 64);
  for (std::size_t i = 0; i < cloud.positions.size(); ++i) {
    cloud.normals.emplace_back(rng.uniform(-1, 1), rng.uniform(-1, 1),
                               rng.uniform(-1, 1));
  }
  ScalarGrid weights(spec);
  for (double& w : weights.values) w = rng.uniform(-1.0, 1.0);

  const auto loss = [&]() {
    auto [chi, tape] = dpsr_forward(cloud, spec, params);
    double acc = 0.0;
    for (std::size_t i = 0; i < chi.values.size(); ++i) acc += chi.values[i] * weights.values[i];
    return acc;
  };
  auto [chi, tape] = dpsr_forward(cloud, spec, params);
  const CloudGrad grad = dpsr_backward(tape, cloud, weights);

  const double err_p = check_points_gradient(cloud.positions, loss, grad.positions);
  const double err_n = check_points_gradient(cloud.normals, loss, grad.normals);
  return {GradCheckEntry{"dpsr/positions", resolution, err_p, 1e-4},
          GradCheckEntry{"dpsr/normals", resolution, err_n, 1e-4}};
}

GradCheckEntry check_chamfer(Rng& rng) {
  std::vector<Vec3> a, b;
  for (int i = 0; i < 64; ++i) {
    a.emplace_back(rng.uniform(), rng.uniform(), rng.uniform());
    b.emplace_back(rng.uniform(), rng.uniform(), rng.uniform());
  }
  const auto loss = [&]() { return chamfer_l2(a, b).value; };
  const ChamferL2 result = chamfer_l2(a, b);
  const double err = check_points_gradient(a, loss, result.grad_a);
  return {"chamfer_l2/grad_a", 0, err, 1e-6};
}

}  // namespace

double GradCheckReport::worst_rel_error() const {
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.max_rel_error);
  return worst;
}

GradCheckReport run_gradcheck(std::uint64_t seed) {
  Rng rng(seed);
  GradCheckReport report;
  for (int r : {8, 16}) {
    report.entries.push_back(check_sample(rng, r));
    report.entries.push_back(check_rasterize_positions(rng, r));
    report.entries.push_back(check_rasterize_normals(rng, r));
    const auto [pos, nrm] = check_solver(rng, r);
    report.entries.push_back(pos);
    report.entries.push_back(nrm);
  }
  report.entries.push_back(check_chamfer(rng));
  return report;
}

}  // namespace psr
