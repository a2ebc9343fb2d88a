#include "cli.hpp"

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "psr/gradcheck.hpp"
#include "psr/io.hpp"
#include "psr/metrics.hpp"
#include "psr/optimize.hpp"

namespace psr::cli {

namespace {

using nlohmann::json;

// Setup-phase problems (bad flags, inconsistent schedules, invalid inputs)
// map to exit code 2; compute failures map to 3.
struct ConfigError : Error {
  using Error::Error;
};

Precision parse_precision(const std::string& name) {
  return name == "f32" ? Precision::f32 : Precision::f64;
}

struct SolveOptions {
  std::string input;
  std::string grid_path;
  std::string mesh_path;
  int resolution = 128;
  double sigma = 2.0;
  std::string precision = "f64";
  bool assume_normalized = false;
};

struct ReconstructOptions {
  std::string input;
  std::string output;
  std::vector<int> resolutions;
  std::vector<int> iterations;
  std::vector<double> sigmas;
  double learning_rate = 2e-3;
  double decay = 0.7;
  std::size_t points = 20000;
  std::size_t samples = 20000;
  std::uint64_t seed = 0;
  int resample_every = 200;
  std::string preset = "clean";
  std::string precision = "f64";
  std::string ground_truth;
};

struct EvalOptions {
  std::string input_a;
  std::string input_b;
  double tau = 0.01;
  std::size_t samples = 100000;
  std::uint64_t seed = 0;
  std::string frame = "unit";
};

Schedule build_schedule(const ReconstructOptions& opt) {
  const Preset preset = opt.preset == "noisy" ? Preset::noisy : Preset::clean;
  Schedule schedule = default_schedule(preset);

  if (!opt.resolutions.empty()) {
    schedule.stages.clear();
    for (std::size_t i = 0; i < opt.resolutions.size(); ++i) {
      Stage stage;
      stage.resolution = opt.resolutions[i];
      stage.iterations = 1000;
      stage.sigma = stage.resolution <= 64 ? 2.0 : 3.0;
      schedule.stages.push_back(stage);
    }
    if (preset == Preset::noisy) schedule.stages.back().sigma = 5.0;
  }
  if (!opt.iterations.empty()) {
    if (opt.iterations.size() != schedule.stages.size()) {
      throw Error("--iters must list one value per stage");
    }
    for (std::size_t i = 0; i < opt.iterations.size(); ++i) {
      schedule.stages[i].iterations = opt.iterations[i];
    }
  }
  if (!opt.sigmas.empty()) {
    if (opt.sigmas.size() != schedule.stages.size()) {
      throw Error("--sigma must list one value per stage");
    }
    for (std::size_t i = 0; i < opt.sigmas.size(); ++i) {
      schedule.stages[i].sigma = opt.sigmas[i];
    }
  }
  for (std::size_t i = 0; i < schedule.stages.size(); ++i) {
    schedule.stages[i].learning_rate =
        opt.learning_rate * std::pow(opt.decay, static_cast<double>(i));
  }
  schedule.point_count = opt.points;
  schedule.loss_samples = opt.samples;
  schedule.seed = opt.seed;
  schedule.resample_every = opt.resample_every;
  schedule.validate();
  return schedule;
}

struct EvalSide {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;  // unit; empty when unavailable
};

EvalSide load_eval_side(const std::string& path_str, std::size_t samples,
                        std::uint64_t seed) {
  const std::filesystem::path path(path_str);
  const std::string ext = path.extension().string();

  EvalSide side;
  if (ext == ".xyz") {
    PointCloudData data = read_point_cloud(path);
    side.points = std::move(data.points);
    side.normals = std::move(data.normals);
  } else {
    const TriangleMesh mesh = read_mesh(path);
    if (!mesh.triangles.empty()) {
      const SurfaceSamples s = sample_surface(mesh, samples, seed);
      side.points = s.points;
      side.normals = s.normals;
      return side;
    }
    if (ext == ".ply") {
      PointCloudData data = read_point_cloud(path);
      side.points = std::move(data.points);
      side.normals = std::move(data.normals);
    } else {
      side.points = mesh.vertices;
    }
  }

  // Cloud normals may carry confidence magnitudes; metrics need unit length.
  for (const Vec3& n : side.normals) {
    if (!(n.norm() > 0.0)) {
      side.normals.clear();
      break;
    }
  }
  for (Vec3& n : side.normals) n.normalize();
  return side;
}

int run_solve(const SolveOptions& opt, std::ostream& err) {
  PointCloudData data = read_point_cloud(opt.input);
  if (!data.has_normals()) {
    throw ConfigError("solve requires an oriented input cloud (normals missing)");
  }
  if (opt.grid_path.empty() && opt.mesh_path.empty()) {
    throw ConfigError("solve needs at least one of --grid or --mesh");
  }
  const GridSpec spec(opt.resolution);

  OrientedPointCloud cloud;
  NormalizationTransform transform;
  if (opt.assume_normalized) {
    cloud.positions = std::move(data.points);
  } else {
    NormalizedInput normalized = normalize_input(data.points);
    if (!normalized.well_conditioned) {
      err << "warning: input is nearly degenerate (fewer than 4 "
             "non-coplanar points)\n";
    }
    cloud.positions = std::move(normalized.points);
    transform = normalized.transform;
  }
  cloud.normals = std::move(data.normals);

  SolverParams params;
  params.sigma = opt.sigma;
  params.precision = parse_precision(opt.precision);

  auto [chi, tape] = dpsr_forward(cloud, spec, params);
  if (!opt.grid_path.empty()) {
    write_grid(opt.grid_path, chi, params.precision);
    err << "wrote grid " << opt.grid_path << "\n";
  }
  if (!opt.mesh_path.empty()) {
    TriangleMesh mesh = marching_cubes(chi);
    if (!opt.assume_normalized) {
      for (Vec3& v : mesh.vertices) v = transform.to_input(v);
      mesh.update_normals();
    }
    write_mesh(opt.mesh_path, mesh);
    err << "wrote mesh " << opt.mesh_path << " (" << mesh.vertices.size()
        << " vertices, " << mesh.triangles.size() << " triangles)\n";
  }
  return 0;
}

int run_reconstruct(const ReconstructOptions& opt, std::ostream& out,
                    std::ostream& err) {
  PointCloudData data = read_point_cloud(opt.input);
  if (data.has_normals()) {
    err << "note: input normals are ignored; reconstruction is unoriented\n";
  }
  Schedule schedule;
  try {
    schedule = build_schedule(opt);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }

  SolverParams params;
  params.precision = parse_precision(opt.precision);

  std::vector<Vec3> gt_points;
  if (!opt.ground_truth.empty()) {
    const EvalSide gt = load_eval_side(opt.ground_truth, 100000, opt.seed);
    gt_points = gt.points;
  }

  const ReconstructionResult result =
      run_reconstruction(data.points, schedule, params, gt_points);
  write_mesh(opt.output, result.mesh);
  err << "wrote mesh " << opt.output << " (" << result.mesh.vertices.size()
      << " vertices, " << result.mesh.triangles.size() << " triangles)\n";

  json summary;
  summary["iterations"] = result.log.iterations.size();
  double final_loss = std::numeric_limits<double>::quiet_NaN();
  for (auto it = result.log.iterations.rbegin();
       it != result.log.iterations.rend(); ++it) {
    if (it->updated) {
      final_loss = it->loss;
      break;
    }
  }
  summary["final_loss"] = final_loss;
  summary["resamples"] = result.log.resample_count;
  summary["skipped_updates"] = result.log.skipped_updates;
  summary["seed"] = opt.seed;
  summary["stages"] = json::array();
  for (const StageMetrics& m : result.log.stage_metrics) {
    summary["stages"].push_back({{"stage", m.stage},
                                 {"resolution", m.resolution},
                                 {"chamfer_l1", m.chamfer_l1},
                                 {"fscore", m.fscore_1pct}});
  }
  out << summary.dump() << "\n";
  return 0;
}

int run_eval(const EvalOptions& opt, std::ostream& out) {
  EvalSide a = load_eval_side(opt.input_a, opt.samples, opt.seed);
  EvalSide b = load_eval_side(opt.input_b, opt.samples, opt.seed);
  if (a.points.empty() || b.points.empty()) {
    throw ConfigError("eval inputs must contain points");
  }

  if (opt.frame == "unit") {
    std::vector<Vec3> all;
    all.reserve(a.points.size() + b.points.size());
    all.insert(all.end(), a.points.begin(), a.points.end());
    all.insert(all.end(), b.points.begin(), b.points.end());
    const NormalizationTransform transform = normalize_input(all).transform;
    for (Vec3& p : a.points) p = transform.to_normalized(p);
    for (Vec3& p : b.points) p = transform.to_normalized(p);
  }

  json line;
  line["chamfer_l1"] = chamfer_l1_metric(a.points, b.points);
  line["fscore"] = fscore(a.points, b.points, opt.tau);
  if (!a.normals.empty() && !b.normals.empty()) {
    line["normal_consistency"] =
        normal_consistency(a.points, a.normals, b.points, b.normals);
  } else {
    line["normal_consistency"] = nullptr;
  }
  line["tau"] = opt.tau;
  out << line.dump() << "\n";
  return 0;
}

int run_gradcheck_cmd(std::uint64_t seed, std::ostream& out) {
  const GradCheckReport report = run_gradcheck(seed);
  json result;
  result["checks"] = json::array();
  for (const GradCheckEntry& e : report.entries) {
    result["checks"].push_back({{"name", e.name},
                                {"resolution", e.resolution},
                                {"max_rel_error", e.max_rel_error},
                                {"tolerance", e.tolerance},
                                {"ok", e.ok()}});
  }
  result["max_rel_error"] = report.worst_rel_error();
  result["ok"] = report.ok();
  out << result.dump() << "\n";
  return report.ok() ? 0 : 3;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Poisson surface reconstruction toolkit"};
  app.require_subcommand(1);

  SolveOptions solve_opt;
  CLI::App* solve = app.add_subcommand(
      "solve", "One spectral Poisson solve from an oriented cloud");
  solve->add_option("input", solve_opt.input, "Input cloud (.xyz or .ply)")
      ->required();
  solve->add_option("--res", solve_opt.resolution, "Grid resolution");
  solve->add_option("--sigma", solve_opt.sigma, "Gaussian bandwidth");
  solve->add_option("--grid", solve_opt.grid_path, "Output grid dump (.sapg)");
  solve->add_option("--mesh", solve_opt.mesh_path, "Output mesh (.obj or .ply)");
  solve->add_option("--precision", solve_opt.precision, "f32 or f64")
      ->check(CLI::IsMember({"f32", "f64"}));
  solve->add_flag("--assume-normalized", solve_opt.assume_normalized,
                  "Input already lies in the unit cube; skip normalization");

  ReconstructOptions rec_opt;
  CLI::App* rec = app.add_subcommand(
      "reconstruct", "Optimize an oriented cloud to fit an unoriented target");
  rec->add_option("input", rec_opt.input, "Target cloud (.xyz or .ply)")
      ->required();
  rec->add_option("--output", rec_opt.output, "Output mesh (.obj or .ply)")
      ->required();
  rec->set_config("--config", "", "Flat key=value config file");
  rec->allow_config_extras(false);
  rec->add_option("--res", rec_opt.resolutions, "Stage resolutions")
      ->delimiter(',');
  rec->add_option("--iters", rec_opt.iterations, "Iterations per stage")
      ->delimiter(',');
  rec->add_option("--sigma", rec_opt.sigmas, "Gaussian bandwidth per stage")
      ->delimiter(',');
  rec->add_option("--lr", rec_opt.learning_rate, "Initial learning rate");
  rec->add_option("--decay", rec_opt.decay, "Learning-rate decay per stage");
  rec->add_option("--points", rec_opt.points, "Optimized point count N");
  rec->add_option("--samples", rec_opt.samples, "Loss surface samples M");
  rec->add_option("--seed", rec_opt.seed, "Random seed");
  rec->add_option("--resample-every", rec_opt.resample_every,
                  "Resampling period in iterations (0 disables)");
  rec->add_option("--preset", rec_opt.preset, "clean or noisy")
      ->check(CLI::IsMember({"clean", "noisy"}));
  rec->add_option("--precision", rec_opt.precision, "f32 or f64")
      ->check(CLI::IsMember({"f32", "f64"}));
  rec->add_option("--gt", rec_opt.ground_truth,
                  "Ground-truth mesh or cloud for per-stage metrics");

  EvalOptions eval_opt;
  CLI::App* eval = app.add_subcommand(
      "eval", "Chamfer-L1, F-Score and normal consistency of two inputs");
  eval->add_option("a", eval_opt.input_a, "First mesh or cloud")->required();
  eval->add_option("b", eval_opt.input_b, "Second mesh or cloud")->required();
  eval->add_option("--tau", eval_opt.tau, "F-Score distance threshold");
  eval->add_option("--samples", eval_opt.samples, "Samples per mesh input");
  eval->add_option("--seed", eval_opt.seed, "Random seed");
  eval->add_option("--metrics-frame", eval_opt.frame,
                   "unit (normalized cube) or input coordinates")
      ->check(CLI::IsMember({"unit", "input"}));

  std::uint64_t gradcheck_seed = 0;
  CLI::App* grad = app.add_subcommand(
      "gradcheck", "Finite-difference verification of all backward passes");
  grad->add_option("--seed", gradcheck_seed, "Random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*solve) return run_solve(solve_opt, err);
    if (*rec) return run_reconstruct(rec_opt, out, err);
    if (*eval) return run_eval(eval_opt, out);
    if (*grad) return run_gradcheck_cmd(gradcheck_seed, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace psr::cli
