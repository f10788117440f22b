#pragma once

#include <optional>
#include <string>

#include "n2n/corrupt/corruptions.hpp"

namespace n2n::corrupt {

enum class CorruptionKind { none, gaussian, brown_gaussian, poisson, bernoulli_mask, text_overlay, impulse };

inline std::string to_string(CorruptionKind k) {
  switch (k) {
    case CorruptionKind::none: return "none";
    case CorruptionKind::gaussian: return "gaussian";
    case CorruptionKind::brown_gaussian: return "brown_gaussian";
    case CorruptionKind::poisson: return "poisson";
    case CorruptionKind::bernoulli_mask: return "bernoulli_mask";
    case CorruptionKind::text_overlay: return "text_overlay";
    case CorruptionKind::impulse: return "impulse";
  }
  return "?";
}

inline CorruptionKind corruption_kind_from_string(const std::string& s) {
  for (auto k : {CorruptionKind::none, CorruptionKind::gaussian, CorruptionKind::brown_gaussian, CorruptionKind::poisson,
                 CorruptionKind::bernoulli_mask, CorruptionKind::text_overlay, CorruptionKind::impulse})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown corruption kind '" + s + "'");
}

/// Closed interval; a degenerate interval is a fixed value. Blind training samples it per image.
struct Range {
  double lo = 0.0;
  double hi = 0.0;

  static Range fixed(double v) { return {v, v}; }
  double sample(Rng& rng) const { return lo == hi ? lo : lo + (hi - lo) * uniform01(rng); }
};

struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::none;
  Range sigma;             // gaussian, brown_gaussian: 0-255 scale
  double bandwidth = 0.0;  // brown_gaussian: filter std in pixels
  Range lambda;            // poisson magnitude; photon scale = 255 / lambda, lambda = 0 is noiseless
  Range p;                 // bernoulli_mask: zeroed fraction; impulse: replacement probability
  Range coverage;          // text_overlay
  std::uint64_t seed = 0;

  static CorruptionSpec gaussian(double sigma, std::uint64_t seed = 0) {
    CorruptionSpec s;
    s.kind = CorruptionKind::gaussian;
    s.sigma = Range::fixed(sigma);
    s.seed = seed;
    return s;
  }

  void validate() const {
    auto unit = [](const Range& r, const char* what) {
      if (!(r.lo >= 0.0 && r.hi <= 1.0 && r.lo <= r.hi))
        throw ConfigError(std::string(what) + " range must satisfy 0 <= lo <= hi <= 1");
    };
    if (!(sigma.lo >= 0.0 && sigma.lo <= sigma.hi)) throw ConfigError("sigma range must satisfy 0 <= lo <= hi");
    if (!(lambda.lo >= 0.0 && lambda.lo <= lambda.hi)) throw ConfigError("lambda range must satisfy 0 <= lo <= hi");
    if (bandwidth < 0.0) throw ConfigError("bandwidth must be non-negative");
    unit(p, "p");
    unit(coverage, "coverage");
    if (kind == CorruptionKind::text_overlay && coverage.hi > 0.95) throw ConfigError("text coverage must not exceed 0.95");
  }
};

inline double photon_scale_from_lambda(double lambda) { return 255.0 / lambda; }

template <class T>
struct Corrupted {
  Array<T> image;
  std::optional<Array<T>> mask;  // bernoulli_mask only: 1 = valid, broadcast over channels
};

/// Applies `spec` to every image of the batch, drawing blind parameters per image.
template <class T>
Corrupted<T> apply(const CorruptionSpec& spec, const Array<T>& clean, Rng& rng) {
  require(clean.rank() == 4, "apply: expected NCHW image, got " + shape_string(clean.shape()));
  if (spec.kind == CorruptionKind::none) return {clean, std::nullopt};
  if (spec.kind == CorruptionKind::bernoulli_mask) {
    Array<T> out = clean;
    Array<T> mask(clean.shape());
    for (int n = 0; n < clean.batch(); ++n) {
      const Array<T> m = bernoulli_mask<T>({1, 1, clean.height(), clean.width()}, spec.p.sample(rng), rng);
      for (int c = 0; c < clean.channels(); ++c)
        for (int y = 0; y < clean.height(); ++y)
          for (int x = 0; x < clean.width(); ++x) {
            mask.at(n, c, y, x) = m.at(0, 0, y, x);
            out.at(n, c, y, x) *= m.at(0, 0, y, x);
          }
    }
    return {std::move(out), std::move(mask)};
  }
  std::vector<Array<T>> parts;
  parts.reserve(clean.batch());
  for (int n = 0; n < clean.batch(); ++n) {
    const Array<T> one = slice_batch(clean, n);
    switch (spec.kind) {
      case CorruptionKind::gaussian: parts.push_back(gaussian_additive(one, spec.sigma.sample(rng), rng)); break;
      case CorruptionKind::brown_gaussian:
        parts.push_back(brown_gaussian(one, spec.sigma.sample(rng), spec.bandwidth, rng));
        break;
      case CorruptionKind::poisson: {
        const double lam = spec.lambda.sample(rng);
        parts.push_back(lam == 0.0 ? one : poisson_photon(one, photon_scale_from_lambda(lam), rng));
        break;
      }
      case CorruptionKind::text_overlay: parts.push_back(text_overlay(one, spec.coverage.sample(rng), rng).image); break;
      case CorruptionKind::impulse: parts.push_back(impulse_noise(one, spec.p.sample(rng), rng)); break;
      default: throw ContractViolation("apply: unhandled corruption kind");
    }
  }
  return {stack_batch(parts), std::nullopt};
}

/// Corrupts with the stream keyed by (spec.seed, draw_index, role).
template <class T>
Corrupted<T> apply_draw(const CorruptionSpec& spec, const Array<T>& clean, std::uint64_t draw_index, StreamRole role) {
  Rng rng = make_stream(spec.seed, draw_index, role);
  return apply(spec, clean, rng);
}

template <class T>
struct CorruptedPair {
  Array<T> input;
  Array<T> target;
  std::optional<Array<T>> input_mask;
  std::optional<Array<T>> target_mask;
  std::optional<Array<T>> clean_ref;
};

/// Two independent corruptions of the same clean latent; input and target use disjoint streams.
template <class T>
CorruptedPair<T> sample_pair(const Array<T>& clean, const CorruptionSpec& input_spec, const CorruptionSpec& target_spec,
                             std::uint64_t draw_index) {
  Corrupted<T> in = apply_draw(input_spec, clean, draw_index, StreamRole::input);
  Corrupted<T> tg = apply_draw(target_spec, clean, draw_index, StreamRole::target);
  return {std::move(in.image), std::move(tg.image), std::move(in.mask), std::move(tg.mask), clean};
}

}  // namespace n2n::corrupt
