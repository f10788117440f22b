#pragma once

#include <random>

#include "n2n/core/array.hpp"
#include "n2n/core/rng.hpp"
#include "n2n/core/tensor.hpp"

namespace n2n::test {

template <class T = double>
Array<T> random_array(const Shape& shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Array<T> a(shape);
  for (auto& v : a.values()) v = static_cast<T>(u(rng));
  return a;
}

/// Random values kept at least `gap` away from zero.
inline Array<double> away_from_zero(const Shape& shape, std::uint64_t seed, double gap = 0.05) {
  Array<double> a = random_array(shape, seed);
  for (auto& v : a.values()) v = v >= 0 ? v + gap : v - gap;
  return a;
}

inline Tensor<double> leaf(Array<double> a) { return Tensor<double>(std::move(a), true); }

}  // namespace n2n::test
