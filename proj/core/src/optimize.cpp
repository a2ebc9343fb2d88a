#include "psr/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "psr/metrics.hpp"
#include "psr/rng.hpp"

namespace psr {

AdamState::AdamState(std::size_t param_count, AdamParams hp) : hp_(hp) {
  reset(param_count);
}

void AdamState::reset(std::size_t param_count) {
  m_.assign(param_count, 0.0);
  v_.assign(param_count, 0.0);
  t_ = 0;
}

void AdamState::step(std::span<double> params, std::span<const double> grad,
                     double learning_rate) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw Error("AdamState::step: parameter layout does not match state");
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(hp_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(hp_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = hp_.beta1 * m_[i] + (1.0 - hp_.beta1) * grad[i];
    v_[i] = hp_.beta2 * v_[i] + (1.0 - hp_.beta2) * grad[i] * grad[i];
    const double m_hat = m_[i] / bc1;
    const double v_hat = v_[i] / bc2;
    params[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + hp_.eps);
  }
}

void Schedule::validate() const {
  if (stages.empty()) throw Error("schedule: no stages");
  int prev = 0;
  for (const Stage& s : stages) {
    if (s.resolution <= prev) {
      throw Error("schedule: resolutions must be strictly increasing");
    }
    if (s.iterations <= 0) throw Error("schedule: iterations must be positive");
    if (s.learning_rate <= 0.0) throw Error("schedule: learning rate must be positive");
    if (s.sigma < 0.0) throw Error("schedule: sigma must be non-negative");
    prev = s.resolution;
  }
  if (resample_every < 0) throw Error("schedule: resample_every must be >= 0");
  if (point_count == 0) throw Error("schedule: point count must be >= 1");
  if (loss_samples == 0) throw Error("schedule: loss sample count must be >= 1");
}

Schedule default_schedule(Preset preset) {
  Schedule s;
  s.stages = {
      {32, 1000, 2.0, 2e-3},
      {64, 1000, 2.0, 1.4e-3},
      {128, 1000, 3.0, 9.8e-4},
      {256, 200, preset == Preset::noisy ? 5.0 : 3.0, 6.86e-4},
  };
  return s;
}

NormalizedInput normalize_input(std::span<const Vec3> raw_points) {
  if (raw_points.empty()) {
    throw Error("normalize_input: empty point set");
  }
  Vec3 lo = raw_points[0], hi = raw_points[0];
  for (const Vec3& p : raw_points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double max_extent = (hi - lo).maxCoeff();
  if (max_extent <= 0.0) {
    throw Error("normalize_input: degenerate input, all points identical");
  }

  NormalizedInput out;
  out.transform.scale = 0.7 / max_extent;
  const Vec3 center = 0.5 * (lo + hi);
  out.transform.translation =
      Vec3::Constant(0.5) - out.transform.scale * center;

  out.points.reserve(raw_points.size());
  Vec3 mean = Vec3::Zero();
  for (const Vec3& p : raw_points) {
    out.points.push_back(out.transform.to_normalized(p));
    mean += out.points.back();
  }
  mean /= static_cast<double>(out.points.size());

  if (raw_points.size() < 4) {
    out.well_conditioned = false;
  } else {
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const Vec3& p : out.points) {
      const Vec3 d = p - mean;
      cov += d * d.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    out.well_conditioned = eig.eigenvalues().minCoeff() > 1e-12 * cov.trace();
  }
  return out;
}

OrientedPointCloud init_sphere(std::size_t count, double radius,
                               const Vec3& center, std::uint64_t seed) {
  if (count == 0) throw Error("init_sphere: count must be >= 1");
  if (radius <= 0.0) throw Error("init_sphere: radius must be positive");
  for (int a = 0; a < 3; ++a) {
    if (center[a] - radius < 0.0 || center[a] + radius >= 1.0) {
      std::ostringstream msg;
      msg << "init_sphere: sphere of radius " << radius << " at ("
          << center.x() << ", " << center.y() << ", " << center.z()
          << ") leaves the domain";
      throw Error(msg.str());
    }
  }

  OrientedPointCloud cloud;
  cloud.positions.reserve(count);
  cloud.normals.reserve(count);
  Rng rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const double cos_theta = 1.0 - 2.0 * rng.uniform();
    const double sin_theta = std::sqrt(std::max(0.0, 1.0 - cos_theta * cos_theta));
    const double phi = 2.0 * std::numbers::pi * rng.uniform();
    const Vec3 dir(sin_theta * std::cos(phi), sin_theta * std::sin(phi),
                   cos_theta);
    cloud.positions.push_back(center + radius * dir);
    cloud.normals.push_back(dir);
  }
  return cloud;
}

namespace {

constexpr double kClampLo = 0.02;
constexpr double kClampHi = 0.98;

void flatten(const OrientedPointCloud& cloud, std::vector<double>& flat) {
  const std::size_t n = cloud.size();
  flat.resize(6 * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int a = 0; a < 3; ++a) {
      flat[3 * i + static_cast<std::size_t>(a)] = cloud.positions[i][a];
      flat[3 * (n + i) + static_cast<std::size_t>(a)] = cloud.normals[i][a];
    }
  }
}

void unflatten(std::span<const double> flat, OrientedPointCloud& cloud) {
  const std::size_t n = cloud.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (int a = 0; a < 3; ++a) {
      cloud.positions[i][a] = std::clamp(
          flat[3 * i + static_cast<std::size_t>(a)], kClampLo, kClampHi);
      cloud.normals[i][a] = flat[3 * (n + i) + static_cast<std::size_t>(a)];
    }
  }
}

}  // namespace

StepOutcome reconstruction_step(OrientedPointCloud& cloud,
                                std::span<const Vec3> target,
                                const GridSpec& spec,
                                const SolverParams& params, AdamState& adam,
                                double learning_rate,
                                std::size_t loss_sample_count,
                                std::uint64_t sample_seed) {
  StepOutcome outcome;

  ScalarGrid chi;
  SolveTape tape;
  try {
    std::tie(chi, tape) = dpsr_forward(cloud, spec, params);
  } catch (const DegenerateScaleError& e) {
    outcome.loss = std::numeric_limits<double>::quiet_NaN();
    outcome.diagnostic = e.what();
    return outcome;
  }

  const TriangleMesh mesh = marching_cubes(chi);
  if (mesh.empty()) {
    outcome.loss = std::numeric_limits<double>::quiet_NaN();
    outcome.diagnostic = "level set vanished (empty mesh)";
    return outcome;
  }

  const SurfaceSamples samples =
      sample_surface(mesh, loss_sample_count, sample_seed);
  const ChamferL2 loss = chamfer_l2(samples.points, target);
  outcome.loss = loss.value;

  const ScalarGrid dl_dchi = mesh_grad_to_grid(samples, loss.grad_a, spec);
  const CloudGrad grads = dpsr_backward(tape, cloud, dl_dchi);

  const std::size_t n = cloud.size();
  std::vector<double> flat_params, flat_grad(6 * n);
  flatten(cloud, flat_params);
  for (std::size_t i = 0; i < n; ++i) {
    for (int a = 0; a < 3; ++a) {
      flat_grad[3 * i + static_cast<std::size_t>(a)] = grads.positions[i][a];
      flat_grad[3 * (n + i) + static_cast<std::size_t>(a)] = grads.normals[i][a];
    }
  }
  adam.step(flat_params, flat_grad, learning_rate);
  unflatten(flat_params, cloud);

  outcome.updated = true;
  return outcome;
}

OrientedPointCloud resample_cloud(const ScalarGrid& chi, std::size_t count,
                                  std::uint64_t seed) {
  const TriangleMesh mesh = largest_component(marching_cubes(chi));
  if (mesh.empty()) {
    throw Error("resample_cloud: empty level set");
  }
  const SurfaceSamples samples = sample_surface(mesh, count, seed);
  OrientedPointCloud cloud;
  cloud.positions = samples.points;
  cloud.normals = samples.normals;
  return cloud;
}

ReconstructionResult run_reconstruction(std::span<const Vec3> target_raw,
                                        const Schedule& schedule,
                                        const SolverParams& base_params,
                                        std::span<const Vec3> ground_truth) {
  schedule.validate();

  NormalizedInput normalized = normalize_input(target_raw);
  const std::vector<Vec3>& target = normalized.points;

  std::vector<Vec3> gt;
  gt.reserve(ground_truth.size());
  for (const Vec3& p : ground_truth) {
    gt.push_back(normalized.transform.to_normalized(p));
  }

  Rng master(schedule.seed);
  ReconstructionResult result;
  result.transform = normalized.transform;
  result.cloud = init_sphere(schedule.point_count, 0.25, Vec3::Constant(0.5),
                             master.raw());

  SolverParams params = base_params;
  AdamState adam(6 * schedule.point_count);

  const int window =
      schedule.resample_every > 0 ? schedule.resample_every : 200;
  int consecutive_skips = 0;

  for (std::size_t stage_idx = 0; stage_idx < schedule.stages.size();
       ++stage_idx) {
    const Stage& stage = schedule.stages[stage_idx];
    const GridSpec spec(stage.resolution);
    params.sigma = stage.sigma;
    adam.reset(6 * schedule.point_count);

    for (int it = 1; it <= stage.iterations; ++it) {
      const std::uint64_t sample_seed = master.raw();
      const StepOutcome outcome =
          reconstruction_step(result.cloud, target, spec, params, adam,
                              stage.learning_rate, schedule.loss_samples,
                              sample_seed);
      result.log.iterations.push_back({static_cast<int>(stage_idx), it,
                                       outcome.loss, outcome.updated});
      if (!outcome.updated) {
        ++result.log.skipped_updates;
        if (++consecutive_skips > 3 * window) {
          std::ostringstream msg;
          msg << "reconstruction aborted at stage " << stage_idx
              << " iteration " << it << ": level set empty for more than 3 "
              << "resampling windows (" << outcome.diagnostic << ")";
          throw Error(msg.str());
        }
      } else {
        consecutive_skips = 0;
      }

      if (schedule.resample_every > 0 && it % schedule.resample_every == 0) {
        const std::uint64_t resample_seed = master.raw();
        try {
          auto [chi, tape] = dpsr_forward(result.cloud, spec, params);
          result.cloud =
              resample_cloud(chi, schedule.point_count, resample_seed);
          adam.reset(6 * schedule.point_count);
          ++result.log.resample_count;
        } catch (const Error&) {
          // Keep the previous cloud; the loop continues.
        }
      }
    }

    if (!gt.empty()) {
      auto [chi, tape] = dpsr_forward(result.cloud, spec, params);
      const TriangleMesh mesh = marching_cubes(chi);
      if (!mesh.empty()) {
        const SurfaceSamples samples =
            sample_surface(mesh, schedule.loss_samples, master.raw());
        StageMetrics metrics;
        metrics.stage = static_cast<int>(stage_idx);
        metrics.resolution = stage.resolution;
        metrics.chamfer_l1 = chamfer_l1_metric(samples.points, gt);
        metrics.fscore_1pct = fscore(samples.points, gt, 0.01);
        result.log.stage_metrics.push_back(metrics);
      }
    }
  }

  const GridSpec final_spec(schedule.stages.back().resolution);
  params.sigma = schedule.stages.back().sigma;
  auto [chi, tape] = dpsr_forward(result.cloud, final_spec, params);
  result.mesh = marching_cubes(chi);
  for (Vec3& v : result.mesh.vertices) {
    v = result.transform.to_input(v);
  }
  result.mesh.update_normals();
  return result;
}

}  // namespace psr
