#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "n2n/core/rng.hpp"
#include "n2n/core/tensor.hpp"

namespace n2n {

struct GradCheckResult {
  double max_relative_error = 0.0;  // worst tensor
  std::size_t probes = 0;
  std::vector<double> per_tensor;

  bool passed(double tol) const { return max_relative_error < tol; }
};

/// Central finite differences against the reverse-mode gradient of `f` with respect to each of
/// `inputs`. Per tensor the error is ||g_analytic - g_numeric|| / max(||g_analytic||, ||g_numeric||)
/// over the probed entries. At most `max_probes` entries per tensor are probed (random subset).
inline GradCheckResult gradcheck(const std::function<Tensor<double>(const std::vector<Tensor<double>>&)>& f,
                                 std::vector<Tensor<double>> inputs, double h = 1e-6, std::size_t max_probes = 64,
                                 std::uint64_t seed = 7) {
  for (auto& t : inputs) {
    require(t.requires_grad(), "gradcheck: every input must require a gradient");
    t.zero_grad();
  }
  backward(f(inputs));

  Rng rng(seed);
  GradCheckResult res;
  for (auto& t : inputs) {
    std::vector<std::size_t> idx(t.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (idx.size() > max_probes) {
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(max_probes);
    }
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t i : idx) {
      const double analytic = t.has_grad() ? t.grad()[i] : 0.0;
      double& x = t.value()[i];
      const double saved = x;
      x = saved + h;
      const double fp = f(inputs).value()[0];
      x = saved - h;
      const double fm = f(inputs).value()[0];
      x = saved;
      const double numeric = (fp - fm) / (2.0 * h);
      diff2 += (analytic - numeric) * (analytic - numeric);
      a2 += analytic * analytic;
      n2 += numeric * numeric;
      ++res.probes;
    }
    const double denom = std::max({std::sqrt(a2), std::sqrt(n2), 1e-12});
    const double err = std::sqrt(diff2) / denom;
    res.per_tensor.push_back(err);
    res.max_relative_error = std::max(res.max_relative_error, err);
  }
  return res;
}

}  // namespace n2n
