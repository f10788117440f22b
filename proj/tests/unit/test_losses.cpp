#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "n2n/core/gradcheck.hpp"
#include "n2n/corrupt/corruptions.hpp"
#include "n2n/loss/losses.hpp"
#include "n2n/loss/metrics.hpp"

using namespace n2n;
using namespace n2n::loss;
using test::leaf;
using test::random_array;

namespace {

Array<double> vec(std::vector<double> v) {
  const int n = static_cast<int>(v.size());
  return Array<double>({n}, std::move(v));
}

}  // namespace

TEST(L2, ZeroAtEquality) {
  auto t = random_array({2, 3}, 1);
  EXPECT_EQ(l2(Tensor<double>(t), t).value()[0], 0.0);
}

TEST(L2, AllOnesMaskIsPlain) {
  auto p = random_array({2, 3}, 2), t = random_array({2, 3}, 3);
  Array<double> ones({2, 3}, 1.0);
  EXPECT_DOUBLE_EQ(l2(Tensor<double>(p), t, &ones).value()[0], l2(Tensor<double>(p), t).value()[0]);
}

TEST(L2, MaskedElementExcluded) {
  Array<double> mask = vec({0, 1});
  EXPECT_EQ(l2(Tensor<double>(vec({0, 1})), vec({1, 1}), &mask).value()[0], 0.0);
}

TEST(L2, EmptyMaskFlagged) {
  Array<double> mask({2}, 0.0);
  bool empty = false;
  auto x = leaf(vec({0, 3}));
  auto loss = l2(x, vec({1, 1}), &mask, &empty);
  EXPECT_TRUE(empty);
  EXPECT_EQ(loss.value()[0], 0.0);
  backward(loss);
  EXPECT_EQ(x.grad()[0], 0.0);
}

TEST(L2, MaskedGradientMatchesFiniteDifferences) {
  Array<double> t = random_array({3, 4}, 4), mask({3, 4});
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = i % 3 ? 1.0 : 0.0;
  auto r = gradcheck([&](const std::vector<Tensor<double>>& in) { return l2(in[0], t, &mask); }, {leaf(random_array({3, 4}, 5))});
  EXPECT_LT(r.max_relative_error, 1e-4);
}

TEST(L1, Values) {
  auto t = random_array({4}, 6);
  EXPECT_EQ(l1(Tensor<double>(t), t).value()[0], 0.0);
  EXPECT_EQ(l1(Tensor<double>(vec({0})), vec({2})).value()[0], 2.0);
}

TEST(L1, GradientSignAndFiniteDifferences) {
  auto p = test::away_from_zero({10}, 7), t = Array<double>({10});
  auto x = leaf(p);
  backward(l1(x, t));
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(x.grad()[i] > 0, p[i] > 0);
  auto r = gradcheck([&](const std::vector<Tensor<double>>& in) { return l1(in[0], t); }, {leaf(p)});
  EXPECT_LT(r.max_relative_error, 1e-4);
}

TEST(L0, GammaTwoMatchesL2) {
  auto p = random_array({50}, 8), t = random_array({50}, 9);
  const double a = l0_annealed(Tensor<double>(p), t, 2.0).value()[0];
  const double b = l2(Tensor<double>(p), t).value()[0];
  double bound = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) bound += 2 * kL0Epsilon * std::abs(p[i] - t[i]) + kL0Epsilon * kL0Epsilon;
  EXPECT_LE(std::abs(a - b), bound / p.size() + 1e-15);
}

TEST(L0, GammaZeroIsConstant) {
  auto x = leaf(random_array({5}, 10));
  auto loss = l0_annealed(x, random_array({5}, 11), 0.0);
  EXPECT_EQ(loss.value()[0], 1.0);
  backward(loss);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(x.has_grad() ? x.grad()[i] : 0.0, 0.0);
}

TEST(L0, EpsilonDefault) { EXPECT_EQ(kL0Epsilon, 1e-8); }

TEST(L0, GradientsMatchFiniteDifferences) {
  auto t = Array<double>({12});
  for (double gamma : {0.5, 1.0, 1.5, 2.0}) {
    auto r = gradcheck([&](const std::vector<Tensor<double>>& in) { return l0_annealed(in[0], t, gamma); },
                       {leaf(test::away_from_zero({12}, 12, 0.1))});
    EXPECT_LT(r.max_relative_error, 1e-4) << "gamma " << gamma;
  }
}

TEST(AnnealGamma, Schedule) {
  EXPECT_EQ(anneal_gamma(0, 100), 2.0);
  EXPECT_EQ(anneal_gamma(100, 100), 0.0);
  EXPECT_EQ(anneal_gamma(50, 100), 1.0);
}

TEST(ToneMap, Values) {
  EXPECT_EQ(tone_map(0.0), 0.0);
  EXPECT_NEAR(tone_map(1.0), 0.729740, 1e-6);
  EXPECT_THROW(tone_map(-0.1), ContractViolation);
}

TEST(ToneMap, StrictlyIncreasingIntoUnitInterval) {
  Rng rng(13);
  std::exponential_distribution<double> e(0.5);
  for (int i = 0; i < 10000; ++i) {
    double a = e(rng), b = e(rng);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    EXPECT_LT(tone_map(a), tone_map(b));
    EXPECT_LT(tone_map(b), 1.0);
  }
}

TEST(ToneMap, GradientMatchesFiniteDifferences) {
  auto r = gradcheck([](const std::vector<Tensor<double>>& in) { return sum(tone_map(in[0])); },
                     {leaf(random_array({8}, 14, 0.1, 5.0))});
  EXPECT_LT(r.max_relative_error, 1e-4);
}

TEST(LHdr, ZeroAtEquality) {
  auto t = random_array({4}, 15, 0.0, 2.0);
  auto x = leaf(t);
  auto loss = l_hdr(x, t);
  EXPECT_EQ(loss.value()[0], 0.0);
  backward(loss);
  for (double g : x.grad().values()) EXPECT_EQ(g, 0.0);
}

TEST(LHdr, DirectValue) { EXPECT_NEAR(l_hdr(Tensor<double>(vec({1})), vec({0})).value()[0], 1.0 / (1.01 * 1.01), 1e-15); }

TEST(LHdr, FrozenDenominatorGradient) {
  auto p = random_array({200}, 16, 0.0, 3.0), t = random_array({200}, 17, 0.0, 3.0);
  auto x = leaf(p);
  backward(l_hdr(x, t));
  double worst_frozen = 0.0, quotient_gap = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = p[i] + 0.01;
    const double frozen = 2.0 * (p[i] - t[i]) / (q * q) / p.size();
    const double full = frozen - 2.0 * (p[i] - t[i]) * (p[i] - t[i]) / (q * q * q) / p.size();
    worst_frozen = std::max(worst_frozen, std::abs(x.grad()[i] - frozen));
    quotient_gap = std::max(quotient_gap, std::abs(x.grad()[i] - full));
  }
  EXPECT_LT(worst_frozen, 1e-6);
  EXPECT_GT(quotient_gap, 1e-3);
}

TEST(RelativeMse, Values) {
  auto t = random_array({4}, 18, 0.0, 1.0);
  EXPECT_EQ(relative_mse(t, t), 0.0);
  EXPECT_NEAR(relative_mse(vec({2}), vec({1}), 0.01), 1.0 / (1.01 * 1.01), 1e-15);
  EXPECT_EQ(relative_mse(vec({0.5}), vec({1})), relative_mse(vec({1.5}), vec({1})));
}

TEST(Psnr, Values) {
  auto a = random_array({16}, 19, 0.0, 1.0);
  EXPECT_EQ(psnr(a, a), std::numeric_limits<double>::infinity());
  Array<double> b = a;
  for (auto& v : b.values()) v += 0.1;
  EXPECT_NEAR(psnr(a, b), 20.0, 1e-9);
  EXPECT_NEAR(psnr(vec({0.0}), vec({0.1})), 20.0, 1e-9);
}

TEST(Losses, NonNegativeAndZeroOnlyAtEquality) {
  auto t = random_array({20}, 20, 0.0, 1.0);
  auto p = random_array({20}, 21, 0.0, 1.0);
  const Array<double>* no_mask = nullptr;
  for (auto kind : {LossKind::l2, LossKind::l1, LossKind::l0_annealed, LossKind::l_hdr}) {
    LossSpec spec{kind};
    EXPECT_GT(evaluate_loss(spec, Tensor<double>(p), t, no_mask, 1.0).value()[0], 0.0) << to_string(kind);
    const double at_eq = evaluate_loss(spec, Tensor<double>(t), t, no_mask, 1.0).value()[0];
    if (kind == LossKind::l0_annealed) EXPECT_LT(at_eq, 1e-7);
    else EXPECT_EQ(at_eq, 0.0) << to_string(kind);
  }
  EXPECT_THROW(evaluate_loss(LossSpec{LossKind::relative_mse}, Tensor<double>(p), t, no_mask, 1.0), ConfigError);
}

TEST(ToneMap, ExpectationDoesNotCommute) {
  Rng rng(22);
  const double v = 0.6, chi = 4.0;
  auto clean = Array<double>::image(1, 1, 400, 400, v);
  auto noisy = corrupt::poisson_photon(clean, chi, rng);
  double et = 0.0, ev = 0.0;
  for (double x : noisy.values()) {
    et += tone_map(x);
    ev += x;
  }
  et /= noisy.size();
  ev /= noisy.size();
  EXPECT_GT(std::abs(et - tone_map(ev)), 0.01);
}
