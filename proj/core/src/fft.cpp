#include "fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>

namespace psr::detail {

namespace {

// FFTW's planner is not reentrant; plan creation is serialized. Executing
// cached plans through the new-array interface is safe concurrently.
std::mutex planner_mutex;

struct PlanSet {
  fftw_plan r2c_d = nullptr;
  fftw_plan c2r_d = nullptr;
  fftwf_plan r2c_f = nullptr;
  fftwf_plan c2r_f = nullptr;
};

std::map<int, PlanSet>& plan_cache() {
  static std::map<int, PlanSet> cache;
  return cache;
}

// Plans are created once per resolution with FFTW_ESTIMATE (deterministic
// plan choice) on scratch fftw_malloc'd arrays; execution reuses them via
// the new-array API, which only requires matching alignment.
PlanSet& plans_for(int r) {
  PlanSet& p = plan_cache()[r];
  if (!p.r2c_d) {
    const std::size_t n = static_cast<std::size_t>(r) * r * r;
    const std::size_t nc = half_spectrum_size(r);

    double* rd = fftw_alloc_real(n);
    fftw_complex* cd = fftw_alloc_complex(nc);
    p.r2c_d = fftw_plan_dft_r2c_3d(r, r, r, rd, cd, FFTW_ESTIMATE);
    p.c2r_d = fftw_plan_dft_c2r_3d(r, r, r, cd, rd, FFTW_ESTIMATE);
    fftw_free(rd);
    fftw_free(cd);

    float* rf = fftwf_alloc_real(n);
    fftwf_complex* cf = fftwf_alloc_complex(nc);
    p.r2c_f = fftwf_plan_dft_r2c_3d(r, r, r, rf, cf, FFTW_ESTIMATE);
    p.c2r_f = fftwf_plan_dft_c2r_3d(r, r, r, cf, rf, FFTW_ESTIMATE);
    fftwf_free(rf);
    fftwf_free(cf);
  }
  return p;
}

PlanSet locked_plans(int r) {
  std::lock_guard<std::mutex> lock(planner_mutex);
  return plans_for(r);
}

}  // namespace

void* fft_alloc_bytes(std::size_t bytes) { return fftw_malloc(bytes); }
void fft_free(void* p) { fftw_free(p); }

void fft_forward_r2c(int r, double* in, std::complex<double>* out) {
  fftw_execute_dft_r2c(locked_plans(r).r2c_d, in,
                       reinterpret_cast<fftw_complex*>(out));
}

void fft_forward_r2c(int r, float* in, std::complex<float>* out) {
  fftwf_execute_dft_r2c(locked_plans(r).r2c_f, in,
                        reinterpret_cast<fftwf_complex*>(out));
}

void fft_inverse_c2r(int r, std::complex<double>* in, double* out) {
  fftw_execute_dft_c2r(locked_plans(r).c2r_d,
                       reinterpret_cast<fftw_complex*>(in), out);
  const std::size_t n = static_cast<std::size_t>(r) * r * r;
  const double scale = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) out[i] *= scale;
}

void fft_inverse_c2r(int r, std::complex<float>* in, float* out) {
  fftwf_execute_dft_c2r(locked_plans(r).c2r_f,
                        reinterpret_cast<fftwf_complex*>(in), out);
  const std::size_t n = static_cast<std::size_t>(r) * r * r;
  const float scale = 1.0f / static_cast<float>(n);
  for (std::size_t i = 0; i < n; ++i) out[i] *= scale;
}

}  // namespace psr::detail
