#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "helpers.hpp"
#include "n2n/core/gradcheck.hpp"
#include "n2n/mri/spectral.hpp"

using namespace n2n;
using namespace n2n::mri;
using test::random_array;

TEST(Fft, ConstantImageIsDcOnly) {
  const double c = 0.7;
  auto img = Array<double>::image(1, 1, 8, 16, c);
  auto s = fft2(img);
  EXPECT_NEAR(s.at(0, 0).real(), c * std::sqrt(8.0 * 16.0), 1e-12);
  for (std::size_t i = 1; i < s.data.size(); ++i) EXPECT_LT(std::abs(s.data[i]), 1e-12);
}

TEST(Fft, RoundTripAndParseval) {
  auto img = random_array({1, 1, 16, 32}, 1);
  auto s = fft2(img);
  auto back = ifft2(s);
  double e_img = 0.0, e_spec = 0.0, worst = 0.0;
  for (std::size_t i = 0; i < img.size(); ++i) {
    worst = std::max(worst, std::abs(back[i] - img[i]));
    e_img += img[i] * img[i];
    e_spec += std::norm(s.data[i]);
  }
  EXPECT_LT(worst, 1e-10);
  EXPECT_NEAR(e_img, e_spec, 1e-10 * e_img);
}

TEST(Fft, RealInputIsHermitian) {
  auto s = fft2(random_array({1, 1, 8, 8}, 2));
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) EXPECT_LT(std::abs(s.at(y, x) - std::conj(s.at((8 - y) % 8, (8 - x) % 8))), 1e-12);
}

TEST(Fft, NonPowerOfTwoRejected) {
  EXPECT_THROW(fft2(Array<double>({1, 1, 6, 8})), ContractViolation);
  EXPECT_THROW(fft2(Array<double>({2, 1, 8, 8})), ContractViolation);
}

TEST(Fft, CenteredFrequencies) {
  EXPECT_EQ(centered_frequency(0, 8), 0);
  EXPECT_EQ(centered_frequency(3, 8), 3);
  EXPECT_EQ(centered_frequency(4, 8), -4);
  EXPECT_EQ(centered_frequency(7, 8), -1);
  EXPECT_DOUBLE_EQ(frequency_radius(7, 3, 8, 8), std::sqrt(10.0));
}

TEST(SolveLambda, Values) {
  EXPECT_EQ(solve_lambda(64, 64, 1.0), 0.0);
  const double l = solve_lambda(256, 256, 0.1);
  EXPECT_NEAR(l, 0.029732865489495178, 1e-12);
  EXPECT_NEAR(expected_fraction(256, 256, l), 0.1, 1e-6);
  EXPECT_GT(solve_lambda(256, 256, 0.05), l);
}

TEST(RussianRoulette, ZeroLambdaKeepsEverything) {
  Rng rng(3);
  auto s = fft2(random_array({1, 1, 8, 8}, 4));
  auto r = russian_roulette(s, 0.0, rng);
  EXPECT_EQ(r.retained_fraction(), 1.0);
  for (std::size_t i = 0; i < s.data.size(); ++i) EXPECT_EQ(r.weighted.data[i], s.data[i]);
}

TEST(RussianRoulette, DcKeptAndMaskHermitian) {
  Rng rng(5);
  auto s = fft2(random_array({1, 1, 32, 32}, 6));
  for (int t = 0; t < 20; ++t) {
    auto r = russian_roulette(s, 0.2, rng);
    EXPECT_TRUE(r.selected(0, 0));
    EXPECT_EQ(r.weighted.at(0, 0), s.at(0, 0));
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x) ASSERT_EQ(r.selected(y, x), r.selected((32 - y) % 32, (32 - x) % 32));
    EXPECT_NO_THROW(ifft2(r.weighted, 1e-9));
  }
}

TEST(RussianRoulette, UnbiasedPerRadiusBin) {
  const int n = 16, draws = 10000;
  auto s = fft2(random_array({1, 1, n, n}, 7));
  const double lambda = 0.15;
  std::vector<int> bin(n * n);
  int bins = 0;
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      bin[y * n + x] = static_cast<int>(frequency_radius(y, x, n, n));
      bins = std::max(bins, bin[y * n + x] + 1);
    }
  // per-draw bin totals of the real part, so Hermitian partners are counted together
  std::vector<double> truth(bins), sum(bins), sum2(bins);
  for (int i = 0; i < n * n; ++i) truth[bin[i]] += s.data[i].real();
  Rng rng(8);
  for (int t = 0; t < draws; ++t) {
    auto r = russian_roulette(s, lambda, rng);
    std::vector<double> tot(bins);
    for (int i = 0; i < n * n; ++i) tot[bin[i]] += r.weighted.data[i].real();
    for (int b = 0; b < bins; ++b) {
      sum[b] += tot[b];
      sum2[b] += tot[b] * tot[b];
    }
  }
  for (int b = 0; b < bins; ++b) {
    const double m = sum[b] / draws;
    const double se = std::sqrt(std::max(0.0, sum2[b] / draws - m * m) / draws);
    EXPECT_LE(std::abs(m - truth[b]), 3.0 * se + 1e-12) << "radius " << b;
  }
}

TEST(RussianRoulette, RetainedFractionNearTarget) {
  Rng rng(9);
  auto s = fft2(random_array({1, 1, 256, 256}, 10));
  auto r = russian_roulette(s, solve_lambda(256, 256, 0.1), rng);
  EXPECT_NEAR(r.retained_fraction(), 0.1, 0.01);
  EXPECT_THROW(russian_roulette(s, -1.0, rng), ContractViolation);
}

TEST(Undersampled, ZeroLambdaReturnsClean) {
  Rng rng(11);
  auto clean = shepp_logan(32);
  auto u = undersampled_image(clean, 0.0, rng);
  for (std::size_t i = 0; i < clean.size(); ++i) EXPECT_NEAR(u.image[i], clean[i], 1e-12);
}

TEST(Undersampled, AverageConvergesToClean) {
  Rng rng(12);
  auto clean = shepp_logan(16);
  Array<double> acc(clean.shape());
  auto err = [&](int k) {
    double e = 0.0;
    for (std::size_t i = 0; i < clean.size(); ++i) e += std::pow(acc[i] / k - clean[i], 2);
    return e / clean.size();
  };
  double e100 = 0.0;
  for (int k = 1; k <= 4000; ++k) {
    auto u = undersampled_image(clean, 0.2, rng);
    for (std::size_t i = 0; i < clean.size(); ++i) acc[i] += u.image[i];
    if (k == 100) e100 = err(k);
  }
  EXPECT_LT(err(4000), e100 / 10.0);
}

TEST(SpectralReplace, FullMaskIgnoresPrediction) {
  Rng rng(13);
  auto clean = random_array({1, 1, 8, 8}, 14);
  auto r = russian_roulette(fft2(clean), 0.0, rng);
  auto out = spectral_replace(Tensor<double>(random_array({1, 1, 8, 8}, 15)), {r});
  for (std::size_t i = 0; i < clean.size(); ++i) EXPECT_NEAR(out.value()[i], clean[i], 1e-12);
}

TEST(SpectralReplace, EmptyMaskIsIdentity) {
  SpectralSample empty{Spectrum(8, 8), std::vector<std::uint8_t>(64, 0), 1.0};
  auto p = random_array({1, 1, 8, 8}, 16);
  auto x = test::leaf(p);
  auto out = spectral_replace(x, {empty});
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(out.value()[i], p[i], 1e-12);
}

TEST(SpectralReplace, AcquiredFrequenciesMatchMeasurement) {
  Rng rng(17);
  auto meas = russian_roulette(fft2(random_array({1, 1, 16, 16}, 18)), 0.3, rng);
  auto out = spectral_replace(Tensor<double>(random_array({1, 1, 16, 16}, 19)), {meas});
  auto s = fft2(out.value());
  for (std::size_t i = 0; i < s.data.size(); ++i)
    if (meas.mask[i]) {
      EXPECT_LT(std::abs(s.data[i] - meas.weighted.data[i]), 1e-10);
    }
}

TEST(SpectralReplace, GradientMatchesFiniteDifferences) {
  Rng rng(20);
  std::vector<SpectralSample> samples;
  for (int b = 0; b < 2; ++b) samples.push_back(russian_roulette(fft2(random_array({1, 1, 8, 8}, 21 + b)), 0.3, rng));
  auto target = random_array({2, 1, 8, 8}, 23);
  auto r = gradcheck([&](const std::vector<Tensor<double>>& in) { return mri_loss(in[0], samples, target); },
                     {test::leaf(random_array({2, 1, 8, 8}, 24))});
  EXPECT_LT(r.max_relative_error, 1e-5);
}

TEST(SpectralReplace, ShapeErrors) {
  SpectralSample s{Spectrum(8, 8), std::vector<std::uint8_t>(64, 0), 1.0};
  EXPECT_THROW(spectral_replace(Tensor<double>(Array<double>({1, 2, 8, 8})), {s}), ContractViolation);
  EXPECT_THROW(spectral_replace(Tensor<double>(Array<double>({2, 1, 8, 8})), {s}), ContractViolation);
  EXPECT_THROW(spectral_replace(Tensor<double>(Array<double>({1, 1, 4, 4})), {s}), ContractViolation);
}

TEST(MriLoss, HandCase) {
  // Only DC acquired: the replaced image is the prediction shifted to the measured mean.
  SpectralSample s{Spectrum(4, 4), std::vector<std::uint8_t>(16, 0), 1.0};
  s.mask[0] = 1;
  s.weighted.data[0] = 0.5 * 4.0;  // mean 0.5 under unitary scaling
  Array<double> pred({1, 1, 4, 4}, 0.0);
  pred[0] = 1.6;  // mean 0.1
  Array<double> target({1, 1, 4, 4}, 0.5);
  auto out = spectral_replace(Tensor<double>(pred), {s});
  EXPECT_NEAR(out.value()[0], 2.0, 1e-12);
  EXPECT_NEAR(out.value()[1], 0.4, 1e-12);
  const double expected = (1.5 * 1.5 + 15 * 0.01) / 16.0;
  EXPECT_NEAR(mri_loss(Tensor<double>(pred), {s}, target).value()[0], expected, 1e-12);
}

TEST(Phantom, RangeAndVariation) {
  auto p = shepp_logan(64);
  double lo = 1e9, hi = -1e9;
  for (double v : p.values()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  EXPECT_GE(lo, 0.0);
  EXPECT_LE(hi, 1.0);
  EXPECT_GT(hi - lo, 0.5);
  Rng a(25), b(25), c(26);
  auto pa = random_phantom(32, a), pb = random_phantom(32, b), pc = random_phantom(32, c);
  EXPECT_EQ(pa.values()[100], pb.values()[100]);
  double d = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) d += std::abs(pa[i] - pc[i]);
  EXPECT_GT(d, 0.0);
}
