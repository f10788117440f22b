#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "n2n/core/rng.hpp"
#include "n2n/core/tensor.hpp"
#include "n2n/loss/losses.hpp"
#include "n2n/mri/fft.hpp"

namespace n2n::mri {

/// Selection probability p(k) = exp(-lambda |k|).
inline double selection_probability(double lambda, double radius) { return std::exp(-lambda * radius); }

/// Mean of p(k) over an h x w grid.
inline double expected_fraction(int h, int w, double lambda) {
  double s = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) s += selection_probability(lambda, frequency_radius(y, x, h, w));
  return s / (static_cast<double>(h) * w);
}

/// Bisection for the lambda whose expected retained fraction equals `target_fraction`.
inline double solve_lambda(int h, int w, double target_fraction) {
  require(target_fraction > 0.0 && target_fraction <= 1.0, "solve_lambda: target fraction must lie in (0,1]");
  if (target_fraction == 1.0) return 0.0;
  double lo = 0.0, hi = 1.0;
  while (expected_fraction(h, w, hi) > target_fraction) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (expected_fraction(h, w, mid) > target_fraction ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

struct SpectralSample {
  Spectrum weighted;                // kept entries divided by p(k), others zero
  std::vector<std::uint8_t> mask;   // 1 where the frequency was acquired
  double lambda = 0.0;

  bool selected(int y, int x) const { return mask[static_cast<std::size_t>(y) * weighted.width + x] != 0; }
  double retained_fraction() const {
    std::size_t k = 0;
    for (auto m : mask) k += m;
    return static_cast<double>(k) / static_cast<double>(mask.size());
  }
};

/// Bernoulli selection of each Hermitian pair {k, -k} with probability p(k); survivors are
/// weighted by 1/p(k) so the sampled spectrum is unbiased.
inline SpectralSample russian_roulette(const Spectrum& spectrum, double lambda, Rng& rng) {
  require(lambda >= 0.0, "russian_roulette: lambda must be non-negative");
  const int h = spectrum.height, w = spectrum.width;
  SpectralSample s{Spectrum(h, w), std::vector<std::uint8_t>(static_cast<std::size_t>(h) * w, 0), lambda};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int py = (h - y) % h, px = (w - x) % w;
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const std::size_t j = static_cast<std::size_t>(py) * w + px;
      if (j < i) continue;  // partner already decided
      const double p = selection_probability(lambda, frequency_radius(y, x, h, w));
      if (!(uniform01(rng) < p)) continue;
      s.mask[i] = s.mask[j] = 1;
      s.weighted.data[i] = spectrum.data[i] / p;
      s.weighted.data[j] = spectrum.data[j] / p;
    }
  return s;
}

/// The acquired values themselves (weights undone). Replacing with these keeps measured
/// frequencies exact instead of 1/p-amplified.
inline SpectralSample unweighted(const SpectralSample& s) {
  SpectralSample out = s;
  const int h = s.weighted.height, w = s.weighted.width;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (s.mask[i]) out.weighted.data[i] *= selection_probability(s.lambda, frequency_radius(y, x, h, w));
    }
  return out;
}

struct Undersampled {
  Array<double> image;  // (1,1,H,W)
  SpectralSample sample;
};

/// IFFT reconstruction of a Russian-roulette undersampled spectrum of `clean`.
template <class T>
Undersampled undersampled_image(const Array<T>& clean, double lambda, Rng& rng) {
  SpectralSample s = russian_roulette(fft2(clean), lambda, rng);
  Array<double> img = ifft2(s.weighted, 1e-6);
  return {std::move(img), std::move(s)};
}

namespace detail {

inline void require_plane_match(const SpectralSample& s, int h, int w) {
  require(s.weighted.height == h && s.weighted.width == w, "spectral sample dimensions do not match the image");
}

}  // namespace detail

/// Overwrites the spectrum of each (1-channel) prediction at acquired frequencies with the
/// measured weighted values and transforms back. The gradient is the projection onto the
/// frequencies that were not acquired.
template <class T>
Tensor<T> spectral_replace(const Tensor<T>& pred, const std::vector<SpectralSample>& samples) {
  const Shape& s = pred.shape();
  require(s.size() == 4 && s[1] == 1, "spectral_replace: expected (N,1,H,W) prediction, got " + shape_string(s));
  require(samples.size() == static_cast<std::size_t>(s[0]), "spectral_replace: need one spectral sample per image");
  const int n = s[0], h = s[2], w = s[3];
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  Array<T> out(s);
  std::vector<double> buf(plane);
  for (int b = 0; b < n; ++b) {
    detail::require_plane_match(samples[b], h, w);
    std::copy_n(pred.value().data() + b * plane, plane, buf.begin());
    Spectrum spec = fft2(buf, h, w);
    for (std::size_t i = 0; i < plane; ++i)
      if (samples[b].mask[i]) spec.data[i] = samples[b].weighted.data[i];
    const Array<double> img = ifft2(spec, 1e-6);
    std::copy_n(img.data(), plane, out.data() + b * plane);
  }
  std::vector<std::vector<std::uint8_t>> masks;
  for (const auto& smp : samples) masks.push_back(smp.mask);
  return Tensor<T>::from_op(std::move(out), {pred}, [masks = std::move(masks), n, h, w, plane](Node<T>& self) {
    auto& g = n2n::detail::parent_grad(self, 0);
    std::vector<double> buf(plane);
    for (int b = 0; b < n; ++b) {
      std::copy_n(self.grad.data() + b * plane, plane, buf.begin());
      Spectrum spec = fft2(buf, h, w);
      for (std::size_t i = 0; i < plane; ++i)
        if (masks[b][i]) spec.data[i] = 0.0;
      const Array<double> back = ifft2(spec, 1e-6);
      for (std::size_t i = 0; i < plane; ++i) g[b * plane + i] += static_cast<T>(back[i]);
    }
  });
}

/// L2 between the frequency-replaced prediction and an independent undersampled target.
template <class T>
Tensor<T> mri_loss(const Tensor<T>& pred, const std::vector<SpectralSample>& samples_in, const Array<T>& target) {
  return loss::l2(spectral_replace(pred, samples_in), target);
}

/// Modified Shepp-Logan ellipses: intensity, semi-axes (a, b), center (x0, y0), angle (deg).
struct Ellipse {
  double intensity, a, b, x0, y0, phi;
};

inline std::vector<Ellipse> shepp_logan_ellipses() {
  return {{1.0, 0.69, 0.92, 0.0, 0.0, 0.0},        {-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0},
          {-0.2, 0.11, 0.31, 0.22, 0.0, -18.0},    {-0.2, 0.16, 0.41, -0.22, 0.0, 18.0},
          {0.1, 0.21, 0.25, 0.0, 0.35, 0.0},       {0.1, 0.046, 0.046, 0.0, 0.1, 0.0},
          {0.1, 0.046, 0.046, 0.0, -0.1, 0.0},     {0.1, 0.046, 0.023, -0.08, -0.605, 0.0},
          {0.1, 0.023, 0.023, 0.0, -0.606, 0.0},   {0.1, 0.023, 0.046, 0.06, -0.605, 0.0}};
}

/// Rasterizes ellipses on [-1,1]^2 into a (1,1,size,size) image clamped to [0,1].
inline Array<double> rasterize(const std::vector<Ellipse>& ellipses, int size) {
  Array<double> img({1, 1, size, size});
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double px = (2.0 * x + 1.0) / size - 1.0;
      const double py = 1.0 - (2.0 * y + 1.0) / size;
      double v = 0.0;
      for (const auto& e : ellipses) {
        const double th = e.phi * std::numbers::pi / 180.0;
        const double dx = px - e.x0, dy = py - e.y0;
        const double u = dx * std::cos(th) + dy * std::sin(th);
        const double t = -dx * std::sin(th) + dy * std::cos(th);
        if ((u * u) / (e.a * e.a) + (t * t) / (e.b * e.b) <= 1.0) v += e.intensity;
      }
      img.at(0, 0, y, x) = std::clamp(v, 0.0, 1.0);
    }
  return img;
}

inline Array<double> shepp_logan(int size) { return rasterize(shepp_logan_ellipses(), size); }

/// Shepp-Logan with every ellipse randomly jittered in position, size, angle and intensity,
/// plus a few extra random inclusions.
inline Array<double> random_phantom(int size, Rng& rng) {
  std::vector<Ellipse> es = shepp_logan_ellipses();
  auto jitter = [&](double scale) { return scale * (2.0 * uniform01(rng) - 1.0); };
  const double outer = 1.0 + jitter(0.12);
  for (std::size_t i = 0; i < es.size(); ++i) {
    Ellipse& e = es[i];
    e.a *= outer * (1.0 + jitter(i < 2 ? 0.05 : 0.3));
    e.b *= outer * (1.0 + jitter(i < 2 ? 0.05 : 0.3));
    e.x0 = e.x0 * outer + jitter(i < 2 ? 0.02 : 0.08);
    e.y0 = e.y0 * outer + jitter(i < 2 ? 0.02 : 0.08);
    e.phi += jitter(i < 2 ? 5.0 : 30.0);
    if (i >= 2) e.intensity *= 1.0 + jitter(0.8);
  }
  const int extra = std::uniform_int_distribution<int>(0, 4)(rng);
  for (int k = 0; k < extra; ++k)
    es.push_back({jitter(0.3), 0.03 + 0.12 * uniform01(rng), 0.03 + 0.12 * uniform01(rng), jitter(0.4), jitter(0.5),
                  jitter(90.0)});
  return rasterize(es, size);
}

}  // namespace n2n::mri
