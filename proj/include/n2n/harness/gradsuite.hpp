#pragma once

#include <functional>
#include <string>
#include <vector>

#include "n2n/core/gradcheck.hpp"
#include "n2n/core/ops.hpp"
#include "n2n/loss/losses.hpp"
#include "n2n/mri/spectral.hpp"
#include "n2n/nn/layers.hpp"
#include "n2n/nn/tabular.hpp"
#include "n2n/nn/unet.hpp"

namespace n2n::harness {

inline constexpr double kElementwiseTolerance = 1e-4;
inline constexpr double kComposedTolerance = 1e-2;

struct GradSuiteEntry {
  std::string name;
  double error = 0.0;
  double tolerance = 0.0;
  bool passed() const { return error < tolerance; }
};

namespace detail {

using Inputs = std::vector<Tensor<double>>;

inline Array<double> uniform_array(const Shape& s, Rng& rng, double lo, double hi) {
  Array<double> a(s);
  for (auto& v : a.values()) v = lo + (hi - lo) * uniform01(rng);
  return a;
}

// |v| >= gap, random sign
inline Array<double> off_zero(const Shape& s, Rng& rng, double gap = 0.1) {
  Array<double> a = uniform_array(s, rng, gap, 1.0);
  for (auto& v : a.values())
    if (uniform01(rng) < 0.5) v = -v;
  return a;
}

inline Tensor<double> param(Array<double> a) { return Tensor<double>(std::move(a), true); }

}  // namespace detail

/// Finite-difference checks of every differentiable operation plus a composed U-Net, in double.
/// L_HDR is checked against its frozen-denominator closed form instead.
inline std::vector<GradSuiteEntry> run_gradient_suite(std::uint64_t seed = 1) {
  using detail::Inputs;
  using detail::off_zero;
  using detail::param;
  using detail::uniform_array;
  Rng rng(seed);
  std::vector<GradSuiteEntry> out;
  auto check = [&](std::string name, const std::function<Tensor<double>(const Inputs&)>& f, Inputs in,
                   double tol = kElementwiseTolerance, std::size_t probes = 64) {
    out.push_back({std::move(name), gradcheck(f, std::move(in), 1e-6, probes, rng()).max_relative_error, tol});
  };
  const Shape v{2, 3, 4, 4};
  const Array<double> w = uniform_array(v, rng, -1.0, 1.0);
  auto proj = [&](const Tensor<double>& t) { return dot_const(t, w); };

  check("add", [&](const Inputs& x) { return proj(add(x[0], x[1])); }, {param(off_zero(v, rng)), param(off_zero(v, rng))});
  check("sub", [&](const Inputs& x) { return proj(sub(x[0], x[1])); }, {param(off_zero(v, rng)), param(off_zero(v, rng))});
  check("mul", [&](const Inputs& x) { return proj(mul(x[0], x[1])); }, {param(off_zero(v, rng)), param(off_zero(v, rng))});
  check("div", [&](const Inputs& x) { return proj(div(x[0], x[1])); },
        {param(off_zero(v, rng)), param(off_zero(v, rng, 0.5))});
  check("scale", [&](const Inputs& x) { return proj(scale(x[0], -1.7)); }, {param(off_zero(v, rng))});
  check("add_scalar", [&](const Inputs& x) { return proj(add_scalar(x[0], 0.3)); }, {param(off_zero(v, rng))});
  check("square", [&](const Inputs& x) { return proj(square(x[0])); }, {param(off_zero(v, rng))});
  check("sum", [&](const Inputs& x) { return sum(square(x[0])); }, {param(off_zero(v, rng))});
  check("mean", [&](const Inputs& x) { return mean(square(x[0])); }, {param(off_zero(v, rng))});

  const Shape co{2, 4, 4, 4};
  const Array<double> wc = uniform_array(co, rng, -1.0, 1.0);
  check("conv2d_same", [&](const Inputs& x) { return dot_const(nn::conv2d_same(x[0], x[1], x[2]), wc); },
        {param(off_zero(v, rng)), param(off_zero({4, 3, 3, 3}, rng)), param(off_zero({4}, rng))});
  const Array<double> wp = uniform_array({2, 3, 2, 2}, rng, -1.0, 1.0);
  check("maxpool2", [&](const Inputs& x) { return dot_const(nn::maxpool2(x[0]), wp); }, {param(off_zero(v, rng))});
  const Array<double> wu = uniform_array({2, 3, 8, 8}, rng, -1.0, 1.0);
  check("upsample_nearest2", [&](const Inputs& x) { return dot_const(nn::upsample_nearest2(x[0]), wu); },
        {param(off_zero(v, rng))});
  const Array<double> wcat = uniform_array({2, 5, 4, 4}, rng, -1.0, 1.0);
  check("concat_channels", [&](const Inputs& x) { return dot_const(nn::concat_channels(x[0], x[1]), wcat); },
        {param(off_zero(v, rng)), param(off_zero({2, 2, 4, 4}, rng))});
  check("leaky_relu", [&](const Inputs& x) { return proj(nn::leaky_relu(x[0], 0.1)); }, {param(off_zero(v, rng))});

  // losses: residuals kept away from the kinks of |d|
  const Array<double> zero(v);
  Array<double> mask(v);
  for (auto& m : mask.values()) m = uniform01(rng) < 0.7 ? 1.0 : 0.0;
  check("l2_masked", [&](const Inputs& x) { return loss::l2(x[0], zero, &mask); }, {param(off_zero(v, rng))});
  check("l1", [&](const Inputs& x) { return loss::l1(x[0], zero); }, {param(off_zero(v, rng))});
  for (double gamma : {0.5, 1.0, 1.5})
    check("l0_annealed(gamma=" + std::to_string(gamma).substr(0, 3) + ")",
          [&, gamma](const Inputs& x) { return loss::l0_annealed(x[0], zero, gamma); }, {param(off_zero(v, rng))});
  check("tone_map", [&](const Inputs& x) { return proj(loss::tone_map(x[0])); }, {param(uniform_array(v, rng, 0.1, 4.0))});

  {
    const Array<double> p = uniform_array(v, rng, 0.0, 3.0), t = uniform_array(v, rng, 0.0, 3.0);
    Tensor<double> x = param(p);
    backward(loss::l_hdr(x, t));
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double q = p[i] + loss::kHdrOffset;
      worst = std::max(worst, std::abs(x.grad()[i] - 2.0 * (p[i] - t[i]) / (q * q) / static_cast<double>(p.size())));
    }
    out.push_back({"l_hdr(frozen denominator)", worst, 1e-6});
  }

  {
    std::vector<mri::SpectralSample> samples;
    for (int b = 0; b < 2; ++b) samples.push_back(mri::russian_roulette(mri::fft2(uniform_array({1, 1, 8, 8}, rng, 0, 1)), 0.3, rng));
    const Array<double> target = uniform_array({2, 1, 8, 8}, rng, 0.0, 1.0);
    const Array<double> wm = uniform_array({2, 1, 8, 8}, rng, -1.0, 1.0);
    check("spectral_replace", [&](const Inputs& x) { return dot_const(mri::spectral_replace(x[0], samples), wm); },
          {param(uniform_array({2, 1, 8, 8}, rng, 0, 1))});
    check("mri_loss", [&](const Inputs& x) { return mri::mri_loss(x[0], samples, target); },
          {param(uniform_array({2, 1, 8, 8}, rng, 0, 1))});
  }
  check("gather", [&](const Inputs& x) { return sum(square(nn::gather(x[0], {0, 2, 2, 3, 0, 1}, {6}))); },
        {param(off_zero({4}, rng))});

  {
    const nn::NetworkSpec spec = nn::NetworkSpec::unet(3, 3, 0.25, 3);
    nn::NetworkState<double> st = nn::build_network<double>(spec, rng);
    const Array<double> x = uniform_array({1, 3, 8, 8}, rng, -0.5, 0.5);
    const Array<double> wn = uniform_array({1, 3, 8, 8}, rng, -1.0, 1.0);
    Inputs in = st.parameters;
    in.push_back(param(x));
    check("unet(composed)",
          [&](const Inputs& p) {
            nn::NetworkState<double> tmp;
            tmp.parameters.assign(p.begin(), p.end() - 1);
            return dot_const(nn::forward(spec, tmp, p.back()), wn);
          },
          in, kComposedTolerance, 16);
  }
  return out;
}

}  // namespace n2n::harness
