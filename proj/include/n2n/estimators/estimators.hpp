#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <vector>

#include "n2n/corrupt/spec.hpp"
#include "n2n/loss/losses.hpp"
#include "n2n/mri/fft.hpp"

namespace n2n::est {

/// Draws y_i of an unreliable measurement, optionally weighted.
struct SampleSet {
  std::vector<double> values;
  std::vector<double> weights;  // empty = uniform

  SampleSet() = default;
  SampleSet(std::vector<double> v, std::vector<double> w = {}) : values(std::move(v)), weights(std::move(w)) { validate(); }

  void validate() const {
    require(!values.empty(), "SampleSet: empty");
    require(weights.empty() || weights.size() == values.size(), "SampleSet: weight count does not match value count");
    for (double v : values) require(std::isfinite(v), "SampleSet: non-finite value");
    for (double w : weights) require(std::isfinite(w) && w >= 0.0, "SampleSet: weights must be finite and non-negative");
  }
  double weight(std::size_t i) const { return weights.empty() ? 1.0 : weights[i]; }
  double total_weight() const {
    return weights.empty() ? static_cast<double>(values.size()) : std::accumulate(weights.begin(), weights.end(), 0.0);
  }
};

/// Minimizes a unimodal function on [lo, hi] by golden-section search.
inline double golden_section(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-10) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return fc <= fd ? c : d;
}

/// Dense grid scan over [min, max] of the samples followed by golden-section refinement
/// inside the bracket of the best grid node.
inline double grid_golden_minimize(const std::function<double(double)>& f, double lo, double hi, int grid = 1001) {
  if (lo == hi) return lo;
  const double step = (hi - lo) / (grid - 1);
  int best = 0;
  double fbest = f(lo);
  for (int i = 1; i < grid; ++i) {
    const double v = f(lo + i * step);
    if (v < fbest) {
      fbest = v;
      best = i;
    }
  }
  const double a = lo + std::max(0, best - 1) * step;
  const double b = lo + std::min(grid - 1, best + 1) * step;
  const double z = golden_section(f, a, b, 1e-12 * std::max(1.0, std::abs(hi - lo)));
  return f(z) <= fbest ? z : lo + best * step;
}

/// Empirical risk sum_i w_i L(z - y_i) / sum_i w_i for the given loss.
inline double empirical_risk(const SampleSet& s, const loss::LossSpec& spec, double z) {
  double acc = 0.0;
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    const double d = std::abs(z - s.values[i]);
    double l = 0.0;
    switch (spec.kind) {
      case loss::LossKind::l2:
      case loss::LossKind::l2_masked: l = d * d; break;
      case loss::LossKind::l1: l = d; break;
      case loss::LossKind::l0_annealed: l = std::pow(d + spec.epsilon, spec.gamma); break;
      default: throw ContractViolation("empirical_risk: unsupported loss " + loss::to_string(spec.kind));
    }
    acc += s.weight(i) * l;
  }
  return acc / s.total_weight();
}

inline double weighted_mean(const SampleSet& s) {
  double acc = 0.0;
  for (std::size_t i = 0; i < s.values.size(); ++i) acc += s.weight(i) * s.values[i];
  return acc / s.total_weight();
}

/// Lower (weighted) median: the smallest sample whose cumulative weight reaches half the total.
inline double lower_median(const SampleSet& s) {
  std::vector<std::size_t> idx(s.values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return s.values[a] < s.values[b]; });
  const double half = 0.5 * s.total_weight();
  double cum = 0.0;
  for (std::size_t i : idx) {
    cum += s.weight(i);
    if (cum >= half) return s.values[i];
  }
  return s.values[idx.back()];
}

/// Point estimate minimizing the average loss over the samples: mean (l2), lower median (l1),
/// or the numeric minimizer of E(|z - y| + eps)^gamma (l0_annealed).
inline double point_estimate(const SampleSet& samples, const loss::LossSpec& spec) {
  samples.validate();
  switch (spec.kind) {
    case loss::LossKind::l2:
    case loss::LossKind::l2_masked: return weighted_mean(samples);
    case loss::LossKind::l1: return lower_median(samples);
    case loss::LossKind::l0_annealed: {
      spec.validate();
      const auto [lo, hi] = std::minmax_element(samples.values.begin(), samples.values.end());
      return grid_golden_minimize([&](double z) { return empirical_risk(samples, spec, z); }, *lo, *hi);
    }
    default: break;
  }
  throw ContractViolation("point_estimate: unsupported loss " + loss::to_string(spec.kind));
}

/// Uniform grid with a density normalized so that sum(q) * dx = 1.
struct DensityGrid {
  std::vector<double> xs;
  std::vector<double> q;

  double dx() const { return xs[1] - xs[0]; }

  void validate() const {
    require(xs.size() >= 2 && xs.size() == q.size(), "DensityGrid: need matching xs and q with at least two points");
    for (std::size_t i = 1; i < xs.size(); ++i) require(xs[i] > xs[i - 1], "DensityGrid: grid must be strictly increasing");
    double mass = 0.0;
    for (double v : q) {
      require(v >= 0.0 && std::isfinite(v), "DensityGrid: density must be finite and non-negative");
      mass += v;
    }
    require(std::abs(mass * dx() - 1.0) <= 1e-6, "DensityGrid: density is not normalized");
  }

  /// Samples `pdf` on `points` nodes over [lo, hi] and normalizes.
  static DensityGrid from_function(const std::function<double(double)>& pdf, double lo, double hi, int points = 1 << 12) {
    DensityGrid g;
    g.xs.resize(points);
    g.q.resize(points);
    const double h = (hi - lo) / (points - 1);
    double mass = 0.0;
    for (int i = 0; i < points; ++i) {
      g.xs[i] = lo + i * h;
      mass += g.q[i] = pdf(g.xs[i]);
    }
    for (auto& v : g.q) v /= mass * h;
    return g;
  }
};

/// Weighted sum of normal densities; used for mode-seeking experiments.
struct GaussianMixture {
  struct Component {
    double weight, mean, stddev;
  };
  std::vector<Component> components;

  double pdf(double x) const {
    double s = 0.0;
    for (const auto& c : components) {
      const double z = (x - c.mean) / c.stddev;
      s += c.weight * std::exp(-0.5 * z * z) / (c.stddev * std::sqrt(2.0 * std::numbers::pi));
    }
    return s;
  }
  double mean() const {
    double s = 0.0;
    for (const auto& c : components) s += c.weight * c.mean;
    return s;
  }
  double stddev() const {
    const double mu = mean();
    double s = 0.0;
    for (const auto& c : components) s += c.weight * (c.stddev * c.stddev + (c.mean - mu) * (c.mean - mu));
    return std::sqrt(s);
  }
  double sample(Rng& rng) const {
    double u = uniform01(rng);
    std::size_t k = 0;
    for (; k + 1 < components.size(); ++k) {
      if (u < components[k].weight) break;
      u -= components[k].weight;
    }
    return std::normal_distribution<double>(components[k].mean, components[k].stddev)(rng);
  }
  /// 2^12-point grid over mean +- 6 std.
  DensityGrid grid(int points = 1 << 12) const {
    const double mu = mean(), sd = stddev();
    return DensityGrid::from_function([this](double x) { return pdf(x); }, mu - 6.0 * sd, mu + 6.0 * sd, points);
  }
};

/// Hilbert transform (1/pi) PV int q(y)/(x-y) dy on the grid, computed spectrally by multiplying
/// the spectrum with -i sgn(omega) after zero-padding to `pad` times the length.
inline std::vector<double> hilbert_transform(const DensityGrid& density, int pad = 4) {
  const std::size_t n = density.q.size();
  std::size_t len = 1;
  while (len < n * static_cast<std::size_t>(pad)) len <<= 1;
  std::vector<mri::Complex> buf(len);
  for (std::size_t i = 0; i < n; ++i) buf[i] = density.q[i];
  mri::dft1d(buf, false);
  for (std::size_t k = 1; k < len; ++k) {
    if (k == len / 2) {
      buf[k] = 0.0;
      continue;
    }
    const double sgn = k < len / 2 ? 1.0 : -1.0;
    buf[k] *= mri::Complex(0.0, -sgn);
  }
  buf[0] = 0.0;
  mri::dft1d(buf, true);
  std::vector<double> h(n);
  for (std::size_t i = 0; i < n; ++i) h[i] = buf[i].real() / static_cast<double>(len);
  return h;
}

/// Zero-crossing of the Hilbert transform (negative to positive, i.e. a minimum of
/// E log|x - y|) nearest the global density maximum; linear interpolation between nodes.
inline double hilbert_zero(const DensityGrid& density) {
  density.validate();
  const std::vector<double> h = hilbert_transform(density);
  const std::size_t peak = static_cast<std::size_t>(std::max_element(density.q.begin(), density.q.end()) - density.q.begin());
  std::optional<double> best;
  double best_dist = 0.0;
  for (std::size_t i = 0; i + 1 < h.size(); ++i) {
    if (!(h[i] < 0.0 && h[i + 1] >= 0.0)) continue;
    const double t = h[i] / (h[i] - h[i + 1]);
    const double x = density.xs[i] + t * (density.xs[i + 1] - density.xs[i]);
    const double dist = std::abs(x - density.xs[peak]);
    if (!best || dist < best_dist) {
      best = x;
      best_dist = dist;
    }
  }
  if (!best) throw NumericalError("hilbert_zero: Hilbert transform has no sign change on the grid");
  return *best;
}

/// Expected squared error of the mean of N corrupted targets: (1/N) * (1/N) sum_ij cov(i,j).
inline double finite_data_error(const Eigen::MatrixXd& cov) {
  require(cov.rows() == cov.cols() && cov.rows() > 0, "finite_data_error: covariance must be square and non-empty");
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  require((cov - cov.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale, "finite_data_error: covariance is not symmetric");
  const double n = static_cast<double>(cov.rows());
  return cov.sum() / (n * n);
}

struct BiasVariance {
  double bias = 0.0;
  double variance = 0.0;
};

/// Simulates `trials` N-sample means of corrupted copies of `clean_value`.
inline BiasVariance empirical_estimator_bias(double clean_value, const corrupt::CorruptionSpec& spec, int n, int trials,
                                             Rng& rng) {
  require(n > 0 && trials > 1, "empirical_estimator_bias: need n > 0 and trials > 1");
  const Array<double> clean({1, 1, 1, n}, clean_value);
  double sum = 0.0, sum_sq = 0.0;
  for (int t = 0; t < trials; ++t) {
    const double m = mean(corrupt::apply(spec, clean, rng).image) - clean_value;
    sum += m;
    sum_sq += m * m;
  }
  const double mu = sum / trials;
  return {mu, (sum_sq - trials * mu * mu) / (trials - 1)};
}

}  // namespace n2n::est
