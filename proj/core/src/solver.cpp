#include "psr/solver.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>

#include "fft.hpp"

namespace psr {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Wavenumber used by the Laplacian (|u|^2): standard DFT ordering, the
// Nyquist bin maps to -r/2.
inline int full_wavenumber(int j, int r) { return j < r / 2 ? j : j - r; }

// Wavenumber used by the first-derivative (divergence) factor: as above but
// zero at the Nyquist bin, so the multiplier stays conjugate-symmetric.
inline int deriv_wavenumber(int j, int r) {
  if (j == r / 2) return 0;
  return j < r / 2 ? j : j - r;
}

void check_finite(const VectorGrid& v) {
  for (double x : v.values) {
    if (!std::isfinite(x)) {
      throw Error("solve_raw: non-finite value in input field");
    }
  }
}

// chi' = IFFT( g(u) * i (u . v_hat) / (-2 pi |u|^2) ), computed over the
// r2c half-spectrum (x halved). T selects the transform precision.
template <typename T>
void spectral_solve(const VectorGrid& v, double sigma, ScalarGrid& out) {
  const int r = v.spec.resolution();
  const std::size_t n = static_cast<std::size_t>(v.spec.voxel_count());
  const std::size_t nc = detail::half_spectrum_size(r);
  const int half = r / 2 + 1;

  detail::FftBuffer<T> real_buf(n);
  detail::FftBuffer<std::complex<T>> spec_buf(nc);
  detail::FftBuffer<std::complex<T>> acc_buf(nc);
  for (std::size_t i = 0; i < nc; ++i) acc_buf[i] = std::complex<T>(0, 0);

  // Accumulate u . v_hat channel by channel.
  for (int ch = 0; ch < 3; ++ch) {
    const double* src = v.channel(ch);
    for (std::size_t i = 0; i < n; ++i) real_buf[i] = static_cast<T>(src[i]);
    detail::fft_forward_r2c(r, real_buf.data(), spec_buf.data());

    std::size_t idx = 0;
    for (int z = 0; z < r; ++z) {
      const int uz = deriv_wavenumber(z, r);
      for (int y = 0; y < r; ++y) {
        const int uy = deriv_wavenumber(y, r);
        for (int xc = 0; xc < half; ++xc, ++idx) {
          const int u = ch == 0 ? deriv_wavenumber(xc, r)
                        : ch == 1 ? uy
                                  : uz;
          if (u != 0) acc_buf[idx] += static_cast<T>(u) * spec_buf[idx];
        }
      }
    }
  }

  // Multiply by i * g / (-2 pi |u|^2); the zero mode is nulled.
  const double inv_r_sq = 1.0 / (static_cast<double>(r) * r);
  std::size_t idx = 0;
  for (int z = 0; z < r; ++z) {
    const double fz = full_wavenumber(z, r);
    for (int y = 0; y < r; ++y) {
      const double fy = full_wavenumber(y, r);
      const double yz_sq = fy * fy + fz * fz;
      for (int xc = 0; xc < half; ++xc, ++idx) {
        const double fx = full_wavenumber(xc, r);
        const double norm_sq = fx * fx + yz_sq;
        if (norm_sq == 0.0) {
          acc_buf[idx] = std::complex<T>(0, 0);
          continue;
        }
        const double g = std::exp(-2.0 * sigma * sigma * norm_sq * inv_r_sq);
        const T q = static_cast<T>(g / (-kTwoPi * norm_sq));
        const std::complex<T> c = acc_buf[idx];
        acc_buf[idx] = std::complex<T>(-q * c.imag(), q * c.real());
      }
    }
  }

  detail::fft_inverse_c2r(r, acc_buf.data(), real_buf.data());
  for (std::size_t i = 0; i < n; ++i) {
    out.values[i] = static_cast<double>(real_buf[i]);
  }
}

// Adjoint of spectral_solve: grad_v_ch = IFFT( conj(K_ch) * FFT(g) ) with
// K_ch(u) = i g(u) u_ch / (-2 pi |u|^2), i.e. the same Gaussian with the
// conjugated derivative factor.
template <typename T>
void spectral_solve_adjoint(const ScalarGrid& upstream, double sigma,
                            VectorGrid& grad_v) {
  const int r = upstream.spec.resolution();
  const std::size_t n = static_cast<std::size_t>(upstream.spec.voxel_count());
  const std::size_t nc = detail::half_spectrum_size(r);
  const int half = r / 2 + 1;

  detail::FftBuffer<T> real_buf(n);
  detail::FftBuffer<std::complex<T>> up_spec(nc);
  detail::FftBuffer<std::complex<T>> work(nc);

  for (std::size_t i = 0; i < n; ++i) {
    real_buf[i] = static_cast<T>(upstream.values[i]);
  }
  detail::fft_forward_r2c(r, real_buf.data(), up_spec.data());

  const double inv_r_sq = 1.0 / (static_cast<double>(r) * r);
  for (int ch = 0; ch < 3; ++ch) {
    std::size_t idx = 0;
    for (int z = 0; z < r; ++z) {
      const double fz = full_wavenumber(z, r);
      const int uz = deriv_wavenumber(z, r);
      for (int y = 0; y < r; ++y) {
        const double fy = full_wavenumber(y, r);
        const int uy = deriv_wavenumber(y, r);
        const double yz_sq = fy * fy + fz * fz;
        for (int xc = 0; xc < half; ++xc, ++idx) {
          const int u = ch == 0 ? deriv_wavenumber(xc, r)
                        : ch == 1 ? uy
                                  : uz;
          const double fx = full_wavenumber(xc, r);
          const double norm_sq = fx * fx + yz_sq;
          if (u == 0 || norm_sq == 0.0) {
            work[idx] = std::complex<T>(0, 0);
            continue;
          }
          const double g = std::exp(-2.0 * sigma * sigma * norm_sq * inv_r_sq);
          const T q = static_cast<T>(static_cast<double>(u) * g /
                                     (-kTwoPi * norm_sq));
          // conj(i q) * c = -i q * c = q * (imag, -real)
          const std::complex<T> c = up_spec[idx];
          work[idx] = std::complex<T>(q * c.imag(), -q * c.real());
        }
      }
    }
    detail::fft_inverse_c2r(r, work.data(), real_buf.data());
    double* dst = grad_v.channel(ch);
    for (std::size_t i = 0; i < n; ++i) {
      dst[i] = static_cast<double>(real_buf[i]);
    }
  }
}

}  // namespace

std::vector<double> gaussian_kernel(const FrequencyGrid& freq, double sigma) {
  const GridSpec& spec = freq.spec();
  const double r = spec.resolution();
  const double coeff = -2.0 * sigma * sigma / (r * r);
  std::vector<double> weights(static_cast<std::size_t>(spec.voxel_count()));
  for (Index i = 0; i < spec.voxel_count(); ++i) {
    weights[static_cast<std::size_t>(i)] = std::exp(coeff * freq.norm_sq(i));
  }
  return weights;
}

ScalarGrid solve_raw(const VectorGrid& v, const SolverParams& params) {
  check_finite(v);
  ScalarGrid chi_raw(v.spec);
  if (params.precision == Precision::f64) {
    spectral_solve<double>(v, params.sigma, chi_raw);
  } else {
    spectral_solve<float>(v, params.sigma, chi_raw);
  }
  return chi_raw;
}

std::pair<ScalarGrid, SolveTape> normalize_indicator(const ScalarGrid& chi_raw,
                                                     std::span<const Vec3> points,
                                                     const SolverParams& params) {
  if (points.empty()) {
    throw Error("normalize_indicator: point set is empty");
  }

  SolveTape tape;
  tape.spec = chi_raw.spec;
  tape.params = params;
  tape.chi_raw = chi_raw;
  tape.positions.assign(points.begin(), points.end());
  tape.stencils.reserve(points.size());

  double mean = 0.0;
  for (const Vec3& p : points) {
    const TrilinearStencil st = trilinear_weights(p, chi_raw.spec);
    double s = 0.0;
    for (int k = 0; k < 8; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      s += st.weight[ks] *
           chi_raw.values[static_cast<std::size_t>(st.corner[ks])];
    }
    mean += s;
    tape.stencils.push_back(st);
  }
  mean /= static_cast<double>(points.size());

  const double corner = chi_raw.values[0] - mean;
  if (std::abs(corner) < params.eps_scale) {
    std::ostringstream msg;
    msg << "normalize_indicator: corner value " << corner
        << " below eps_scale " << params.eps_scale
        << " (shape indistinct at the domain corner)";
    throw DegenerateScaleError(msg.str());
  }
  tape.mean = mean;
  tape.corner = corner;

  const double scale = params.magnitude / std::abs(corner);
  ScalarGrid chi(chi_raw.spec);
  for (std::size_t i = 0; i < chi.values.size(); ++i) {
    chi.values[i] = scale * (chi_raw.values[i] - mean);
  }
  // The formula gives scale * corner = +/- m at node 0; write that value
  // directly so the constraint holds without rounding.
  chi.values[0] = std::copysign(params.magnitude, corner);
  return {std::move(chi), std::move(tape)};
}

std::pair<ScalarGrid, SolveTape> dpsr_forward(const OrientedPointCloud& cloud,
                                              const GridSpec& spec,
                                              const SolverParams& params) {
  const VectorGrid v = rasterize(cloud, spec);
  const ScalarGrid chi_raw = solve_raw(v, params);
  return normalize_indicator(chi_raw, cloud.positions, params);
}

CloudGrad dpsr_backward(const SolveTape& tape, const OrientedPointCloud& cloud,
                        const ScalarGrid& upstream) {
  if (upstream.spec != tape.spec) {
    throw Error("dpsr_backward: upstream grid spec mismatch");
  }
  if (cloud.size() != tape.positions.size() ||
      cloud.positions != tape.positions) {
    throw Error("dpsr_backward: cloud does not match the tape's forward call");
  }

  const std::size_t point_count = tape.positions.size();
  const double inv_count = 1.0 / static_cast<double>(point_count);
  const double scale = tape.params.magnitude / std::abs(tape.corner);

  // chi_j = scale * (chi_raw_j - mu): accumulate the sensitivities of the
  // scale factor (through a = chi_raw(0) - mu), the mean term and the
  // direct term.
  double upstream_sum = 0.0;
  double d_scale = 0.0;  // dL/d(scale) = <U, chi_raw - mu>
  for (std::size_t i = 0; i < upstream.values.size(); ++i) {
    upstream_sum += upstream.values[i];
    d_scale += upstream.values[i] * (tape.chi_raw.values[i] - tape.mean);
  }
  const double d_corner = d_scale * (-scale / tape.corner);
  const double d_mean = -scale * upstream_sum - d_corner;

  ScalarGrid d_chi_raw(tape.spec);
  for (std::size_t i = 0; i < d_chi_raw.values.size(); ++i) {
    d_chi_raw.values[i] = scale * upstream.values[i];
  }
  d_chi_raw.values[0] += d_corner;

  CloudGrad grad;
  grad.positions.assign(point_count, Vec3::Zero());
  grad.normals.assign(point_count, Vec3::Zero());

  // Mean term: mu = (1/N) sum_i sample(chi_raw, c_i). Scatter into the raw
  // grid gradient and pick up the position gradients of the samples.
  const double d_mean_per_point = d_mean * inv_count;
  for (std::size_t i = 0; i < point_count; ++i) {
    const TrilinearStencil& st = tape.stencils[i];
    Vec3 gp = Vec3::Zero();
    for (int k = 0; k < 8; ++k) {
      const auto ks = static_cast<std::size_t>(k);
      const auto c = static_cast<std::size_t>(st.corner[ks]);
      d_chi_raw.values[c] += d_mean_per_point * st.weight[ks];
      gp += tape.chi_raw.values[c] * st.weight_grad[ks];
    }
    grad.positions[i] = d_mean_per_point * gp;
  }

  // Adjoint of the spectral solve, then of the rasterization.
  VectorGrid d_v(tape.spec);
  if (tape.params.precision == Precision::f64) {
    spectral_solve_adjoint<double>(d_chi_raw, tape.params.sigma, d_v);
  } else {
    spectral_solve_adjoint<float>(d_chi_raw, tape.params.sigma, d_v);
  }

  const RasterizeGrad rg = rasterize_backward(cloud, tape.spec, d_v);
  for (std::size_t i = 0; i < point_count; ++i) {
    grad.positions[i] += rg.positions[i];
    grad.normals[i] = rg.normals[i];
  }
  return grad;
}

ScalarGrid solve_raw_reference(const VectorGrid& v, const SolverParams& params) {
  const int r = v.spec.resolution();
  if (r > 16) {
    throw Error("solve_raw_reference: resolution above the r <= 16 cost guard");
  }
  check_finite(v);

  using Cplx = std::complex<double>;
  const std::size_t n = static_cast<std::size_t>(v.spec.voxel_count());
  const std::size_t rs = static_cast<std::size_t>(r);

  // Direct-summation 1D DFT applied along each axis in turn. Deliberately
  // self-contained: own twiddle factors, own frequency bookkeeping.
  const auto dft3 = [&](std::vector<Cplx>& data, int sign) {
    std::vector<Cplx> twiddle(rs);
    for (int m = 0; m < r; ++m) {
      const double angle = sign * kTwoPi * m / r;
      twiddle[static_cast<std::size_t>(m)] = Cplx(std::cos(angle), std::sin(angle));
    }
    std::vector<Cplx> line(rs), transformed(rs);
    for (int axis = 0; axis < 3; ++axis) {
      const std::size_t stride = axis == 0 ? 1 : axis == 1 ? rs : rs * rs;
      const std::size_t plane_a = axis == 0 ? rs : 1;
      const std::size_t plane_b = axis == 2 ? rs : rs * rs;
      for (std::size_t a = 0; a < rs; ++a) {
        for (std::size_t b = 0; b < rs; ++b) {
          const std::size_t base = a * plane_a + b * plane_b;
          for (std::size_t j = 0; j < rs; ++j) line[j] = data[base + j * stride];
          for (std::size_t k = 0; k < rs; ++k) {
            Cplx acc(0, 0);
            for (std::size_t j = 0; j < rs; ++j) {
              acc += line[j] * twiddle[(j * k) % rs];
            }
            transformed[k] = acc;
          }
          for (std::size_t k = 0; k < rs; ++k) data[base + k * stride] = transformed[k];
        }
      }
    }
  };

  const auto freq = [&](int j) { return j < r / 2 ? j : j - r; };
  const auto dfreq = [&](int j) { return j == r / 2 ? 0 : freq(j); };

  // u . v_hat over the full spectrum.
  std::vector<Cplx> acc(n, Cplx(0, 0));
  std::vector<Cplx> work(n);
  for (int ch = 0; ch < 3; ++ch) {
    const double* src = v.channel(ch);
    for (std::size_t i = 0; i < n; ++i) work[i] = Cplx(src[i], 0.0);
    dft3(work, -1);
    std::size_t idx = 0;
    for (int z = 0; z < r; ++z) {
      for (int y = 0; y < r; ++y) {
        for (int x = 0; x < r; ++x, ++idx) {
          const int u = ch == 0 ? dfreq(x) : ch == 1 ? dfreq(y) : dfreq(z);
          acc[idx] += static_cast<double>(u) * work[idx];
        }
      }
    }
  }

  // i * g / (-2 pi |u|^2), zero mode nulled, then inverse transform.
  std::size_t idx = 0;
  for (int z = 0; z < r; ++z) {
    for (int y = 0; y < r; ++y) {
      for (int x = 0; x < r; ++x, ++idx) {
        const double fx = freq(x), fy = freq(y), fz = freq(z);
        const double norm_sq = fx * fx + fy * fy + fz * fz;
        if (norm_sq == 0.0) {
          acc[idx] = Cplx(0, 0);
          continue;
        }
        const double g =
            std::exp(-2.0 * params.sigma * params.sigma * norm_sq /
                     (static_cast<double>(r) * r));
        const double q = g / (-kTwoPi * norm_sq);
        acc[idx] = Cplx(0, 1) * q * acc[idx];
      }
    }
  }
  dft3(acc, +1);

  ScalarGrid chi_raw(v.spec);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    chi_raw.values[i] = acc[i].real() * inv_n;
  }
  return chi_raw;
}

}  // namespace psr
