#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "n2n/core/array.hpp"

namespace n2n::loss {

template <class T>
double mse(const Array<T>& a, const Array<T>& b) {
  require(a.shape() == b.shape(), "mse: shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

/// 10 log10(peak^2 / MSE) in dB; identical inputs give +infinity.
template <class T>
double psnr(const Array<T>& a, const Array<T>& b, double peak = 1.0) {
  const double e = mse(a, b);
  if (e == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / e);
}

template <class T>
Array<T> clip01(const Array<T>& a) {
  return map(a, [](T v) { return std::clamp(v, T(0), T(1)); });
}

}  // namespace n2n::loss
