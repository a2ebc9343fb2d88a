#pragma once

#include <span>
#include <utility>
#include <vector>

#include "psr/grid.hpp"
#include "psr/rasterize.hpp"

namespace psr {

enum class Precision { f32, f64 };

struct SolverParams {
  /// Spectral Gaussian bandwidth, in resolution-relative units (the kernel
  /// is exp(-2 sigma^2 |u|^2 / r^2), so equal sigma smooths comparably in
  /// physical space across resolutions).
  double sigma = 2.0;
  /// Indicator magnitude pinned at grid node (0,0,0).
  double magnitude = 0.5;
  /// Guard for the corner-value division in the normalization.
  double eps_scale = 1e-8;
  /// f32 runs the spectral transforms in single precision (a speed option;
  /// expect roughly 100x looser tolerances). Everything else stays double.
  Precision precision = Precision::f64;
};

/// Spectral Gaussian low-pass weights exp(-2 sigma^2 |u|^2 / r^2), one per
/// voxel in DFT order. Weight is 1 at u = 0 and monotone decreasing in
/// |u|^2.
std::vector<double> gaussian_kernel(const FrequencyGrid& freq, double sigma);

/// Cached intermediates of one forward solve, sufficient to run the exact
/// backward pass. Belongs to the forward call that produced it; may be read
/// concurrently.
struct SolveTape {
  GridSpec spec{4};
  SolverParams params;
  ScalarGrid chi_raw;                      // pre-normalization solution
  double mean = 0.0;                       // mu, mean of chi_raw at the points
  double corner = 0.0;                     // a = chi_raw(node 0) - mu
  std::vector<Vec3> positions;             // points of the matching forward call
  std::vector<TrilinearStencil> stencils;  // trilinear records at those points
};

/// Screens and integrates the rasterized normal field in the spectral
/// domain:
///
///   chi_hat(u) = g(u) * i (u . v_hat(u)) / (-2 pi |u|^2),   chi_hat(0) = 0
///
/// with g the Gaussian above, and returns the real inverse transform.
/// The zero mode is nulled (the solution is defined up to a constant; the
/// normalization step subtracts a mean anyway) and the first-derivative
/// factor treats the Nyquist wavenumber -r/2 as zero on each axis, which
/// keeps the spectral multiplier conjugate-symmetric and the output exactly
/// real. The result is linear in v.
ScalarGrid solve_raw(const VectorGrid& v, const SolverParams& params);

/// Applies the boundary conditions to a raw solution:
///
///   chi = m / |a| * (chi_raw - mu)
///
/// where mu is the mean of chi_raw sampled (trilinearly) at the points and
/// a = chi_raw(node 0) - mu. Consequently |chi| at grid node (0,0,0) equals
/// m exactly and the point-sampled mean of chi is zero.
std::pair<ScalarGrid, SolveTape> normalize_indicator(const ScalarGrid& chi_raw,
                                                     std::span<const Vec3> points,
                                                     const SolverParams& params);

/// rasterize + solve_raw + normalize_indicator. With outward normals the
/// resulting indicator is negative inside a closed shape and positive
/// outside.
std::pair<ScalarGrid, SolveTape> dpsr_forward(const OrientedPointCloud& cloud,
                                              const GridSpec& spec,
                                              const SolverParams& params);

struct CloudGrad {
  std::vector<Vec3> positions;
  std::vector<Vec3> normals;
};

/// Exact reverse-mode gradient of cloud -> chi for a given upstream
/// dL/dchi: the normalization chain (scale, mean and corner terms, with the
/// mean contributing position gradients), the spectral adjoint (conjugated
/// kernel), and the rasterization adjoint.
CloudGrad dpsr_backward(const SolveTape& tape, const OrientedPointCloud& cloud,
                        const ScalarGrid& upstream);

/// Reference implementation of solve_raw by direct-summation DFTs with its
/// own frequency and kernel arithmetic; used as the test oracle for the
/// FFT-backed path. Refuses resolutions above 16 (cost guard).
ScalarGrid solve_raw_reference(const VectorGrid& v, const SolverParams& params);

}  // namespace psr
