#pragma once

#include <complex>
#include <cstddef>

// Thin layer over FFTW's real-to-complex transforms on the library's
// x-fastest cubical layout. Internal to the solver.
//
// The complex half-spectrum keeps x as the halved (fastest) axis:
//
//   spectral index = xc + (r/2 + 1) * (y + r * z),   xc = 0 .. r/2
//
// Forward transforms are unscaled; the inverse applies the 1/n factor.
// Buffers passed to the transform functions must come from FftBuffer so
// their alignment matches the cached plans.

namespace psr::detail {

void* fft_alloc_bytes(std::size_t bytes);
void fft_free(void* p);

template <typename T>
class FftBuffer {
 public:
  explicit FftBuffer(std::size_t count)
      : data_(static_cast<T*>(fft_alloc_bytes(count * sizeof(T)))),
        size_(count) {}
  ~FftBuffer() { fft_free(data_); }
  FftBuffer(const FftBuffer&) = delete;
  FftBuffer& operator=(const FftBuffer&) = delete;

  T* data() { return data_; }
  const T* data() const { return data_; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }
  std::size_t size() const { return size_; }

 private:
  T* data_;
  std::size_t size_;
};

inline std::size_t half_spectrum_size(int r) {
  return static_cast<std::size_t>(r / 2 + 1) * static_cast<std::size_t>(r) *
         static_cast<std::size_t>(r);
}

void fft_forward_r2c(int r, double* in, std::complex<double>* out);
void fft_forward_r2c(int r, float* in, std::complex<float>* out);

// Destroys `in`, as usual for multidimensional c2r transforms.
void fft_inverse_c2r(int r, std::complex<double>* in, double* out);
void fft_inverse_c2r(int r, std::complex<float>* in, float* out);

}  // namespace psr::detail
