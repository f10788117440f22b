#pragma once

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "n2n/core/array.hpp"

namespace n2n::mri {

using Complex = std::complex<double>;

namespace detail {

// FFTW's planner is not thread-safe; plans are created once per (rank, dims, direction) and
// executed through the new-array interface, which is.
inline fftw_plan cached_plan(int rows, int cols, int sign) {
  static std::mutex mutex;
  static std::map<std::tuple<int, int, int>, fftw_plan> plans;
  std::lock_guard lock(mutex);
  auto key = std::make_tuple(rows, cols, sign);
  if (auto it = plans.find(key); it != plans.end()) return it->second;
  const std::size_t n = static_cast<std::size_t>(rows) * cols;
  auto* buf = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
  const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
  fftw_plan p = rows == 1 ? fftw_plan_dft_1d(cols, buf, buf, sign, flags)
                          : fftw_plan_dft_2d(rows, cols, buf, buf, sign, flags);
  fftw_free(buf);
  plans.emplace(key, p);
  return p;
}

inline void execute(std::vector<Complex>& data, int rows, int cols, int sign) {
  auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(cached_plan(rows, cols, sign), ptr, ptr);
}

}  // namespace detail

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

/// Unnormalized 1-D DFT in place (sign -1 forward, +1 inverse).
inline void dft1d(std::vector<Complex>& data, bool inverse) {
  detail::execute(data, 1, static_cast<int>(data.size()), inverse ? FFTW_BACKWARD : FFTW_FORWARD);
}

/// H x W complex grid, DC at index (0,0).
struct Spectrum {
  int height = 0;
  int width = 0;
  std::vector<Complex> data;

  Spectrum() = default;
  Spectrum(int h, int w) : height(h), width(w), data(static_cast<std::size_t>(h) * w) {}

  Complex& at(int y, int x) { return data[static_cast<std::size_t>(y) * width + x]; }
  const Complex& at(int y, int x) const { return data[static_cast<std::size_t>(y) * width + x]; }
};

namespace detail {

inline void require_pow2(int h, int w) {
  if (!is_power_of_two(h) || !is_power_of_two(w))
    throw ContractViolation("fft2: dimensions " + std::to_string(h) + "x" + std::to_string(w) +
                            " are not powers of two");
}

}  // namespace detail

/// Unitary 2-D DFT of a real plane of h*w values.
inline Spectrum fft2(std::span<const double> plane, int h, int w) {
  detail::require_pow2(h, w);
  require(plane.size() == static_cast<std::size_t>(h) * w, "fft2: plane size does not match dimensions");
  Spectrum s(h, w);
  for (std::size_t i = 0; i < plane.size(); ++i) s.data[i] = plane[i];
  detail::execute(s.data, h, w, FFTW_FORWARD);
  const double norm = 1.0 / std::sqrt(static_cast<double>(h) * w);
  for (auto& v : s.data) v *= norm;
  return s;
}

/// Image overload: uses the last two dimensions; the array must hold exactly one plane.
template <class T>
Spectrum fft2(const Array<T>& image) {
  require(image.rank() >= 2, "fft2: need at least two dimensions");
  const int h = image.dim(image.rank() - 2), w = image.dim(image.rank() - 1);
  require(image.size() == static_cast<std::size_t>(h) * w, "fft2: expected a single plane, got " + shape_string(image.shape()));
  std::vector<double> plane(image.values().begin(), image.values().end());
  return fft2(plane, h, w);
}

/// Unitary inverse DFT; returns the complex plane.
inline std::vector<Complex> ifft2_complex(const Spectrum& s) {
  detail::require_pow2(s.height, s.width);
  std::vector<Complex> out = s.data;
  detail::execute(out, s.height, s.width, FFTW_BACKWARD);
  const double norm = 1.0 / std::sqrt(static_cast<double>(s.height) * s.width);
  for (auto& v : out) v *= norm;
  return out;
}

/// Unitary inverse DFT as a (1,1,H,W) real image. Fails if the imaginary part exceeds `tolerance`.
inline Array<double> ifft2(const Spectrum& s, double tolerance = 1e-6) {
  const std::vector<Complex> c = ifft2_complex(s);
  Array<double> out({1, 1, s.height, s.width});
  double worst = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    out[i] = c[i].real();
    worst = std::max(worst, std::abs(c[i].imag()));
  }
  if (worst > tolerance)
    throw NumericalError("ifft2: imaginary residue " + std::to_string(worst) + " exceeds tolerance");
  return out;
}

/// Centered integer frequency of DFT index i on an n-point axis (i >= n/2 maps to i - n).
inline int centered_frequency(int i, int n) { return i < n / 2 ? i : i - n; }

/// Euclidean radius |k| of bin (y,x) in index units, DC at the origin.
inline double frequency_radius(int y, int x, int h, int w) {
  const double ky = centered_frequency(y, h), kx = centered_frequency(x, w);
  return std::sqrt(ky * ky + kx * kx);
}

}  // namespace n2n::mri
