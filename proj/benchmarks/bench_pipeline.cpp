#include <benchmark/benchmark.h>

#include "psr/isosurface.hpp"
#include "psr/metrics.hpp"
#include "psr/optimize.hpp"
#include "psr/solver.hpp"

namespace {

psr::OrientedPointCloud sphere_cloud(std::size_t n) {
  return psr::init_sphere(n, 0.3, psr::Vec3::Constant(0.5), 7);
}

void BM_Rasterize(benchmark::State& state) {
  const psr::GridSpec spec(static_cast<int>(state.range(0)));
  const auto cloud = sphere_cloud(20000);
  for (auto _ : state) {
    benchmark::DoNotOptimize(psr::rasterize(cloud, spec));
  }
}
BENCHMARK(BM_Rasterize)->Arg(64)->Arg(128)->Arg(256);

void BM_SolveForward(benchmark::State& state) {
  const psr::GridSpec spec(static_cast<int>(state.range(0)));
  const auto cloud = sphere_cloud(5000);
  psr::SolverParams params;
  for (auto _ : state) {
    benchmark::DoNotOptimize(psr::dpsr_forward(cloud, spec, params));
  }
}
BENCHMARK(BM_SolveForward)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_SolveBackward(benchmark::State& state) {
  const psr::GridSpec spec(static_cast<int>(state.range(0)));
  const auto cloud = sphere_cloud(5000);
  psr::SolverParams params;
  auto [chi, tape] = psr::dpsr_forward(cloud, spec, params);
  psr::ScalarGrid upstream(spec);
  for (std::size_t i = 0; i < upstream.values.size(); ++i) {
    upstream.values[i] = static_cast<double>(i % 17) / 17.0 - 0.5;
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(psr::dpsr_backward(tape, cloud, upstream));
  }
}
BENCHMARK(BM_SolveBackward)->Arg(32)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_MarchingCubes(benchmark::State& state) {
  const psr::GridSpec spec(static_cast<int>(state.range(0)));
  const auto cloud = sphere_cloud(5000);
  psr::SolverParams params;
  auto [chi, tape] = psr::dpsr_forward(cloud, spec, params);
  for (auto _ : state) {
    benchmark::DoNotOptimize(psr::marching_cubes(chi));
  }
}
BENCHMARK(BM_MarchingCubes)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_ChamferL2(benchmark::State& state) {
  const auto a = sphere_cloud(20000).positions;
  const auto b = sphere_cloud(10000).positions;
  for (auto _ : state) {
    benchmark::DoNotOptimize(psr::chamfer_l2(a, b));
  }
}
BENCHMARK(BM_ChamferL2)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
