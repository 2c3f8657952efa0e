#include "gsavatar/losses.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "gsavatar/rng.hpp"

namespace gsa {
namespace {

std::vector<double> random_image(Rng& rng, int w, int h, double lo = 0.05, double hi = 0.95) {
  std::vector<double> img(size_t(w) * h * 3);
  for (auto& v : img) v = rng.uniform(lo, hi);
  return img;
}

TEST(L1, IdenticalImagesGiveZero) {
  Rng rng(1);
  const auto a = random_image(rng, 8, 8);
  EXPECT_EQ(l1_loss(a, a), 0.0);
}

TEST(L1, ConstantOffsetGivesOffset) {
  Rng rng(2);
  auto a = random_image(rng, 8, 8, 0.1, 0.8);
  auto b = a;
  for (auto& v : b) v += 0.1;
  EXPECT_NEAR(l1_loss(a, b), 0.1, 1e-12);
}

TEST(L1, MatchesDirectSummation) {
  Rng rng(3);
  const auto a = random_image(rng, 13, 7);
  const auto b = random_image(rng, 13, 7);
  double acc = 0;
  for (size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  EXPECT_NEAR(l1_loss(a, b), acc / a.size(), 1e-7);
}

TEST(L1, ShapeMismatchThrows) {
  std::vector<double> a(12, 0.0), b(9, 0.0);
  EXPECT_THROW(l1_loss(a, b), std::invalid_argument);
}

TEST(Ssim, SelfSimilarityIsOne) {
  Rng rng(5);
  const auto a = random_image(rng, 24, 18);
  EXPECT_NEAR(ssim(a, a, 24, 18, 3), 1.0, 1e-6);
}

TEST(Ssim, ConstantImagesZeroVsOne) {
  // mu_a = 0, mu_b = 1, zero variance: ssim = C1 / (1 + C1) ~ 1e-4.
  const int w = 16, h = 16;
  std::vector<double> a(size_t(w) * h * 3, 0.0), b(size_t(w) * h * 3, 1.0);
  const double expected = 1e-4 / (1.0 + 1e-4);
  EXPECT_NEAR(ssim(a, b, w, h, 3), expected, 1e-8);
}

TEST(Ssim, Symmetry) {
  Rng rng(7);
  const auto a = random_image(rng, 20, 14);
  const auto b = random_image(rng, 20, 14);
  EXPECT_NEAR(ssim(a, b, 20, 14, 3), ssim(b, a, 20, 14, 3), 1e-12);
}

TEST(Ssim, RangeAndShiftInvariance) {
  Rng rng(9);
  const auto a = random_image(rng, 20, 20, 0.2, 0.6);
  auto b = a;
  for (auto& v : b) v = std::min(0.9, v + 0.05 * std::sin(v * 40.0));
  const double s = ssim(a, b, 20, 20, 3);
  EXPECT_GE(s, -1.0);
  EXPECT_LE(s, 1.0);
  // Simultaneous constant shift inside the stabilized regime.
  auto a2 = a, b2 = b;
  for (auto& v : a2) v += 0.1;
  for (auto& v : b2) v += 0.1;
  EXPECT_NEAR(ssim(a2, b2, 20, 20, 3), s, 1e-3);
}

TEST(Ssim, TooSmallImageThrows) {
  std::vector<double> a(8 * 8 * 3, 0.5);
  EXPECT_THROW(ssim(a, a, 8, 8, 3), std::invalid_argument);
}

TEST(Psnr, KnownMseGivesKnownDb) {
  // Uniform squared error of 0.01 -> 20 dB.
  std::vector<float> a(300, 0.5f), b(300, 0.6f);
  EXPECT_NEAR(psnr(a, b), 20.0, 1e-5);
}

TEST(Psnr, IdenticalImagesCapAt99) {
  std::vector<float> a(100, 0.3f);
  EXPECT_EQ(psnr(a, a), 99.0);
}

TEST(Psnr, MatchesDirectFormula) {
  Rng rng(11);
  std::vector<float> a(48), b(48);
  for (size_t i = 0; i < a.size(); ++i) {
    a[i] = float(rng.uniform());
    b[i] = float(rng.uniform());
  }
  double mse = 0;
  for (size_t i = 0; i < a.size(); ++i) mse += (double(a[i]) - b[i]) * (double(a[i]) - b[i]);
  mse /= a.size();
  EXPECT_NEAR(psnr(a, b), -10.0 * std::log10(mse), 1e-6);
}

TEST(TotalLoss, ZeroOnIdenticalImages) {
  Rng rng(13);
  const auto a = random_image(rng, 16, 16);
  LossWeights w;
  EXPECT_NEAR(total_loss(a, a, 16, 16, 3, w, nullptr), 0.0, 1e-12);
}

TEST(TotalLoss, CombinesTermsWithWeights) {
  Rng rng(15);
  const auto a = random_image(rng, 16, 16);
  const auto b = random_image(rng, 16, 16);
  LossWeights w;  // defaults 0.8 / 0.2 / inert lpips
  double l1t = 0, ssimt = 0;
  const double total = total_loss(a, b, 16, 16, 3, w, nullptr, &l1t, &ssimt);
  EXPECT_NEAR(total, 0.8 * l1t + 0.2 * (1.0 - ssimt), 1e-12);
  EXPECT_NEAR(l1t, l1_loss(a, b), 1e-12);
  EXPECT_NEAR(ssimt, ssim(a, b, 16, 16, 3), 1e-12);
  // The spec's worked example: L1 = 0.1, SSIM = 0.9 -> 0.8*0.1 + 0.2*0.1.
  EXPECT_NEAR(0.8 * 0.1 + 0.2 * (1.0 - 0.9), 0.10, 1e-15);
}

TEST(TotalLoss, GradientMatchesFiniteDifferences) {
  Rng rng(17);
  const int w = 16, h = 12;
  auto a = random_image(rng, w, h, 0.15, 0.85);
  auto b = random_image(rng, w, h, 0.15, 0.85);
  // Keep |a-b| away from the L1 kink relative to the step size.
  for (size_t i = 0; i < a.size(); ++i)
    if (std::abs(a[i] - b[i]) < 5e-3) a[i] += 1e-2;
  LossWeights lw;
  std::vector<double> grad;
  total_loss(a, b, w, h, 3, lw, &grad);
  const double h_step = 1e-4;
  double worst = 0;
  Rng pick(18);
  for (int t = 0; t < 200; ++t) {
    const size_t i = size_t(pick.uniform_int(int64_t(a.size())));
    auto ap = a, am = a;
    ap[i] += h_step;
    am[i] -= h_step;
    const double fd = (total_loss(ap, b, w, h, 3, lw, nullptr) -
                       total_loss(am, b, w, h, 3, lw, nullptr)) /
                      (2 * h_step);
    const double rel = std::abs(fd - grad[i]) / std::max({1.0, std::abs(fd), std::abs(grad[i])});
    worst = std::max(worst, rel);
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(TotalLoss, LpipsSlotIsInert) {
  Rng rng(19);
  const auto a = random_image(rng, 16, 16);
  const auto b = random_image(rng, 16, 16);
  LossWeights w1, w2;
  w2.lpips = 0.01;  // recorded paper value; must not change anything here
  EXPECT_EQ(total_loss(a, b, 16, 16, 3, w1, nullptr), total_loss(a, b, 16, 16, 3, w2, nullptr));
}

}  // namespace
}  // namespace gsa
