#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "psr/isosurface.hpp"
#include "psr/rasterize.hpp"
#include "psr/solver.hpp"

namespace psr {

struct AdamParams {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment accumulators for a flat parameter vector. Reset
/// whenever the parameter identities change (resampling, resolution
/// change).
class AdamState {
 public:
  AdamState() = default;
  explicit AdamState(std::size_t param_count, AdamParams hp = {});

  void reset(std::size_t param_count);
  void step(std::span<double> params, std::span<const double> grad,
            double learning_rate);
  std::int64_t steps() const { return t_; }

 private:
  AdamParams hp_;
  std::vector<double> m_, v_;
  std::int64_t t_ = 0;
};

struct Stage {
  int resolution = 32;
  int iterations = 1000;
  double sigma = 2.0;
  double learning_rate = 2e-3;
};

struct Schedule {
  std::vector<Stage> stages;
  int resample_every = 200;         // iterations; 0 disables resampling
  std::size_t point_count = 20000;  // optimized cloud size N
  std::size_t loss_samples = 20000; // mesh samples per iteration M
  std::uint64_t seed = 0;

  void validate() const;  // throws Error on inconsistent settings
};

enum class Preset { clean, noisy };

/// Coarse-to-fine defaults: 1000 iterations at 32^3, 64^3, 128^3 and 200 at
/// 256^3; sigma 2, 2, 3, 3 (the noisy preset raises the final sigma to 5);
/// learning rate 2e-3 decayed by 0.7 at every resolution increase.
Schedule default_schedule(Preset preset = Preset::clean);

/// Uniform scale + translation between input coordinates and the centered
/// sub-cube of the solver domain.
struct NormalizationTransform {
  double scale = 1.0;
  Vec3 translation = Vec3::Zero();

  Vec3 to_normalized(const Vec3& p) const { return scale * p + translation; }
  Vec3 to_input(const Vec3& p) const { return (p - translation) / scale; }
};

struct NormalizedInput {
  std::vector<Vec3> points;
  NormalizationTransform transform;
  bool well_conditioned = true;  // false for fewer than 4 or coplanar points
};

/// Maps the input bounding box uniformly into [0.15, 0.85]^3 (aspect
/// preserved, centered), keeping shapes away from the periodic seam.
/// Throws on an empty or fully degenerate (single-point) input.
NormalizedInput normalize_input(std::span<const Vec3> raw_points);

/// Area-uniform sphere sampling with outward unit normals; deterministic
/// per seed. Throws if the sphere does not fit inside the domain.
OrientedPointCloud init_sphere(std::size_t count, double radius,
                               const Vec3& center, std::uint64_t seed);

struct StepOutcome {
  double loss = 0.0;
  bool updated = false;     // false: empty mesh or degenerate solver scale
  std::string diagnostic;   // set when updated is false
};

/// One optimization iteration: forward solve, marching cubes, surface
/// sampling, Chamfer loss against the target, gradient bridge back to the
/// grid, backward solve, Adam update. Positions are clamped to
/// [0.02, 0.98]^3 after the update. An empty level set skips the update and
/// reports a diagnostic instead of failing.
StepOutcome reconstruction_step(OrientedPointCloud& cloud,
                                std::span<const Vec3> target,
                                const GridSpec& spec,
                                const SolverParams& params, AdamState& adam,
                                double learning_rate,
                                std::size_t loss_sample_count,
                                std::uint64_t sample_seed);

/// Replaces the cloud with a fresh area-uniform sampling of the largest
/// component of the current level set. The caller must reset Adam state
/// afterwards (point identities changed). Throws if the level set is empty.
OrientedPointCloud resample_cloud(const ScalarGrid& chi, std::size_t count,
                                  std::uint64_t seed);

struct IterationRecord {
  int stage = 0;
  int iteration = 0;  // 1-based within the stage
  double loss = 0.0;
  bool updated = true;
};

struct StageMetrics {
  int stage = 0;
  int resolution = 0;
  double chamfer_l1 = 0.0;
  double fscore_1pct = 0.0;
};

struct ReconstructionLog {
  std::vector<IterationRecord> iterations;
  std::vector<StageMetrics> stage_metrics;  // filled when ground truth given
  int resample_count = 0;
  int skipped_updates = 0;
};

struct ReconstructionResult {
  TriangleMesh mesh;             // final mesh, de-normalized to input frame
  OrientedPointCloud cloud;      // final point representation (solver frame)
  NormalizationTransform transform;
  ReconstructionLog log;
};

/// Runs the full coarse-to-fine optimization from a sphere initialization.
/// The cloud carries over across resolution increases; resampling replaces
/// it every schedule.resample_every iterations. Per-stage Chamfer-L1 and
/// F-Score are logged against ground_truth (input frame) when provided,
/// measured in the normalized frame. Aborts with an Error if the level set
/// stays empty for more than 3 consecutive resampling windows.
ReconstructionResult run_reconstruction(std::span<const Vec3> target_raw,
                                        const Schedule& schedule,
                                        const SolverParams& base_params,
                                        std::span<const Vec3> ground_truth = {});

}  // namespace psr
