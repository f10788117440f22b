#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "n2n/core/array.hpp"
#include "n2n/core/rng.hpp"
#include "n2n/corrupt/font5x7.hpp"

namespace n2n::corrupt {

// All generators take clean images in [0,1] and never clip their output.

/// clean + N(0, (sigma/255)^2) per value; sigma is on the 0-255 scale.
template <class T>
Array<T> gaussian_additive(const Array<T>& clean, double sigma, Rng& rng) {
  require(sigma >= 0.0, "gaussian_additive: sigma must be non-negative");
  Array<T> out = clean;
  if (sigma == 0.0) return out;
  std::normal_distribution<double> normal(0.0, sigma / 255.0);
  for (auto& v : out.values()) v = static_cast<T>(v + normal(rng));
  return out;
}

/// Normalized 1-D Gaussian taps with standard deviation `bandwidth` (radius ceil(3*bandwidth)).
inline std::vector<double> gaussian_taps(double bandwidth) {
  if (bandwidth <= 0.0) return {1.0};
  const int radius = static_cast<int>(std::ceil(3.0 * bandwidth));
  std::vector<double> k(2 * radius + 1);
  double s = 0.0;
  for (int i = -radius; i <= radius; ++i) s += k[i + radius] = std::exp(-0.5 * i * i / (bandwidth * bandwidth));
  for (auto& v : k) v /= s;
  return k;
}

/// Spatially correlated Gaussian noise: white noise blurred by a Gaussian filter of std
/// `bandwidth` pixels, rescaled by 1/sqrt(sum k^2) so the per-pixel std stays sigma/255.
template <class T>
Array<T> brown_gaussian(const Array<T>& clean, double sigma, double bandwidth, Rng& rng) {
  require(sigma >= 0.0 && bandwidth >= 0.0, "brown_gaussian: sigma and bandwidth must be non-negative");
  if (bandwidth == 0.0) return gaussian_additive(clean, sigma, rng);
  Array<T> out = clean;
  if (sigma == 0.0) return out;
  const std::vector<double> taps = gaussian_taps(bandwidth);
  const int r = static_cast<int>(taps.size() / 2);
  double sum_sq_1d = 0.0;
  for (double t : taps) sum_sq_1d += t * t;
  // 2-D kernel is the outer product, so sum k^2 = (sum k1^2)^2.
  const double gain = (sigma / 255.0) / sum_sq_1d;
  const int h = clean.height(), w = clean.width();
  const int ph = h + 2 * r, pw = w + 2 * r;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> field(static_cast<std::size_t>(ph) * pw), tmp(static_cast<std::size_t>(ph) * w);
  for (int n = 0; n < clean.batch(); ++n)
    for (int c = 0; c < clean.channels(); ++c) {
      for (auto& v : field) v = normal(rng);
      for (int y = 0; y < ph; ++y)
        for (int x = 0; x < w; ++x) {
          double s = 0.0;
          for (int k = 0; k <= 2 * r; ++k) s += taps[k] * field[static_cast<std::size_t>(y) * pw + x + k];
          tmp[static_cast<std::size_t>(y) * w + x] = s;
        }
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          double s = 0.0;
          for (int k = 0; k <= 2 * r; ++k) s += taps[k] * tmp[static_cast<std::size_t>(y + k) * w + x];
          out.at(n, c, y, x) = static_cast<T>(out.at(n, c, y, x) + gain * s);
        }
    }
  return out;
}

/// Poisson(photon_scale * v) / photon_scale per value. Zero-mean error with variance v/photon_scale.
template <class T>
Array<T> poisson_photon(const Array<T>& clean, double photon_scale, Rng& rng) {
  require(photon_scale > 0.0, "poisson_photon: photon scale must be positive");
  Array<T> out(clean.shape());
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const double rate = photon_scale * std::max(0.0, static_cast<double>(clean[i]));
    if (rate == 0.0) {
      out[i] = T(0);
      continue;
    }
    std::poisson_distribution<long long> poisson(rate);
    out[i] = static_cast<T>(static_cast<double>(poisson(rng)) / photon_scale);
  }
  return out;
}

/// i.i.d. binary mask; each entry is 0 (corrupted) with probability p.
template <class T>
Array<T> bernoulli_mask(const Shape& shape, double p, Rng& rng) {
  require(p >= 0.0 && p <= 1.0, "bernoulli_mask: p must lie in [0,1]");
  Array<T> m(shape, T(1));
  for (auto& v : m.values()) v = uniform01(rng) < p ? T(0) : T(1);
  return m;
}

template <class T>
struct TextOverlayResult {
  Array<T> image;
  Array<T> covered;  // (N,1,H,W) 1 where any glyph was drawn
  double coverage = 0.0;
};

/// Draws random strings (random position, integer scale 1-4, color) until the fraction of
/// overwritten pixels first reaches `coverage`. Overlapping glyph pixels count once.
template <class T>
TextOverlayResult<T> text_overlay(const Array<T>& clean, double coverage, Rng& rng) {
  require(coverage >= 0.0 && coverage <= 0.95, "text_overlay: coverage must lie in [0, 0.95]");
  require(clean.rank() == 4, "text_overlay: expected NCHW image, got " + shape_string(clean.shape()));
  const int h = clean.height(), w = clean.width(), ch = clean.channels();
  TextOverlayResult<T> res{clean, Array<T>({clean.batch(), 1, h, w}), 0.0};
  const std::size_t pixels = static_cast<std::size_t>(h) * w;
  const std::size_t needed = static_cast<std::size_t>(std::ceil(coverage * static_cast<double>(pixels)));
  std::uniform_int_distribution<int> len_dist(3, 10), scale_dist(1, 4), glyph_dist(0, static_cast<int>(kGlyphChars.size()) - 1);
  double total_cov = 0.0;
  for (int n = 0; n < clean.batch(); ++n) {
    std::size_t covered = 0;
    for (int attempt = 0; covered < needed && attempt < 100000; ++attempt) {
      const int len = len_dist(rng), sc = scale_dist(rng);
      const int sw = len * kGlyphAdvance * sc, sh = kGlyphHeight * sc;
      const int x0 = std::uniform_int_distribution<int>(-sw / 2, w - 1)(rng);
      const int y0 = std::uniform_int_distribution<int>(-sh / 2, h - 1)(rng);
      std::vector<double> color(ch);
      for (auto& c : color) c = uniform01(rng);
      for (int g = 0; g < len && covered < needed; ++g) {
        const std::size_t glyph = static_cast<std::size_t>(glyph_dist(rng));
        for (int row = 0; row < kGlyphHeight * sc && covered < needed; ++row)
          for (int col = 0; col < kGlyphWidth * sc && covered < needed; ++col) {
            if (!glyph_pixel(glyph, row / sc, col / sc)) continue;
            const int y = y0 + row, x = x0 + g * kGlyphAdvance * sc + col;
            if (y < 0 || y >= h || x < 0 || x >= w) continue;
            T& mark = res.covered.at(n, 0, y, x);
            if (mark == T(0)) {
              mark = T(1);
              ++covered;
            }
            for (int c = 0; c < ch; ++c) res.image.at(n, c, y, x) = static_cast<T>(color[c]);
          }
      }
    }
    total_cov += static_cast<double>(covered) / static_cast<double>(pixels);
  }
  res.coverage = total_cov / clean.batch();
  return res;
}

/// Each pixel, with probability p, gets all channels replaced by independent U[0,1] values.
template <class T>
Array<T> impulse_noise(const Array<T>& clean, double p, Rng& rng) {
  require(p >= 0.0 && p <= 1.0, "impulse_noise: p must lie in [0,1]");
  require(clean.rank() == 4, "impulse_noise: expected NCHW image, got " + shape_string(clean.shape()));
  Array<T> out = clean;
  for (int n = 0; n < clean.batch(); ++n)
    for (int y = 0; y < clean.height(); ++y)
      for (int x = 0; x < clean.width(); ++x) {
        if (!(uniform01(rng) < p)) continue;
        for (int c = 0; c < clean.channels(); ++c) out.at(n, c, y, x) = static_cast<T>(uniform01(rng));
      }
  return out;
}

}  // namespace n2n::corrupt
