#include <numbers>

#include <gtest/gtest.h>

#include "ddtime/spectral.hpp"
#include "test_util.hpp"

using namespace ddtime;
using ddtime::testing::close_rel;
using ddtime::testing::random_vector;

TEST(Dft, ConstantIsDcOnly) {
  for (std::size_t n : {1u, 5u, 8u, 24u}) {
    const std::vector<double> x(n, 1.5);
    const auto X = dft(x);
    EXPECT_NEAR(X[0].real(), 1.5 * static_cast<double>(n), 1e-12);
    EXPECT_NEAR(X[0].imag(), 0.0, 1e-12);
    for (std::size_t k = 1; k < n; ++k) EXPECT_LT(std::abs(X[k]), 1e-12) << n << ' ' << k;
  }
}

TEST(Dft, ImpulseIsFlat) {
  const auto X = dft(std::vector<double>{1, 0, 0, 0});
  for (const auto& c : X) {
    EXPECT_NEAR(c.real(), 1.0, 1e-15);
    EXPECT_NEAR(c.imag(), 0.0, 1e-15);
  }
}

TEST(Dft, HandEvaluatedSine) {
  const auto X = dft(std::vector<double>{0, 1, 0, -1});
  const std::vector<std::complex<double>> want{{0, 0}, {0, -2}, {0, 0}, {0, 2}};
  for (std::size_t k = 0; k < 4; ++k) EXPECT_LT(std::abs(X[k] - want[k]), 1e-12);
}

TEST(Dft, FastPathAgreesWithDirect) {
  std::mt19937_64 gen(1);
  for (std::size_t n : {1u, 2u, 4u, 16u, 64u, 256u}) {
    const auto x = random_vector(gen, n);
    const auto a = dft(x);
    const auto b = dft_direct(x);
    for (std::size_t k = 0; k < n; ++k) EXPECT_LT(std::abs(a[k] - b[k]), 1e-9) << n;
  }
}

TEST(Dft, Linearity) {
  std::mt19937_64 gen(2);
  for (std::size_t n : {7u, 24u, 32u}) {
    const auto x = random_vector(gen, n);
    const auto y = random_vector(gen, n);
    const double a = 0.3;
    const double b = -2.1;
    std::vector<double> mix(n);
    for (std::size_t i = 0; i < n; ++i) mix[i] = a * x[i] + b * y[i];
    const auto M = dft(mix);
    const auto X = dft(x);
    const auto Y = dft(y);
    for (std::size_t k = 0; k < n; ++k) EXPECT_LT(std::abs(M[k] - (a * X[k] + b * Y[k])), 1e-10);
  }
}

TEST(Dft, ConjugateSymmetryForRealInput) {
  std::mt19937_64 gen(3);
  for (std::size_t n : {5u, 24u, 64u}) {
    const auto X = dft(random_vector(gen, n));
    for (std::size_t k = 1; k < n; ++k) EXPECT_LT(std::abs(X[k] - std::conj(X[n - k])), 1e-10);
  }
}

TEST(Dft, Parseval) {
  std::mt19937_64 gen(4);
  for (std::size_t n : {3u, 24u, 64u, 100u}) {
    const auto x = random_vector(gen, n);
    double time = 0.0;
    for (double v : x) time += v * v;
    double freq = 0.0;
    for (const auto& c : dft(x)) freq += std::norm(c);
    EXPECT_TRUE(close_rel(freq, static_cast<double>(n) * time, 1e-9));
    double power = 0.0;
    for (double p : power_spectrum(x)) power += p;
    EXPECT_TRUE(close_rel(power, time, 1e-9));
  }
}

TEST(SpectralL1, Examples) {
  const std::vector<double> a{1, 0, 0, 0};
  const std::vector<double> z{0, 0, 0, 0};
  EXPECT_EQ(spectral_l1(a, a), 0.0);
  EXPECT_NEAR(spectral_l1(a, z), 4.0, 1e-12);
  EXPECT_THROW(spectral_l1(a, std::vector<double>{0, 0}), Error);
}

TEST(SpectralL1, TriangleInequality) {
  std::mt19937_64 gen(5);
  for (int i = 0; i < 100; ++i) {
    const auto a = random_vector(gen, 24);
    const auto b = random_vector(gen, 24);
    const auto c = random_vector(gen, 24);
    EXPECT_LE(spectral_l1(a, c), spectral_l1(a, b) + spectral_l1(b, c) + 1e-12);
  }
}

TEST(SpectralL1, GradientMatchesFiniteDifferences) {
  std::mt19937_64 gen(6);
  const double h = 1e-6;
  for (std::size_t n : {4u, 7u, 24u}) {
    auto a = random_vector(gen, n);
    const auto b = random_vector(gen, n);
    const auto g = spectral_l1_grad(a, b);
    for (std::size_t k = 0; k < n; ++k) {
      const double saved = a[k];
      a[k] = saved + h;
      const double up = spectral_l1(a, b);
      a[k] = saved - h;
      const double down = spectral_l1(a, b);
      a[k] = saved;
      EXPECT_TRUE(close_rel(g[k], (up - down) / (2 * h), 1e-6, 1e-8));
    }
  }
}

TEST(SpectralL1, GradientAtCoincidenceIsZero) {
  const std::vector<double> a{0.5, -1, 2};
  for (double g : spectral_l1_grad(a, a)) EXPECT_EQ(g, 0.0);
}

TEST(PowerSpectrum, Examples) {
  for (double p : power_spectrum(std::vector<double>(6, 0.0))) EXPECT_EQ(p, 0.0);
  const auto ps = power_spectrum(std::vector<double>(5, 2.0));
  EXPECT_NEAR(ps[0], 5 * 4.0, 1e-12);
  for (std::size_t k = 1; k < 5; ++k) EXPECT_LT(ps[k], 1e-24);
}

// White noise has asymptotically uncorrelated DFT bins of equal power.
TEST(Dft, WhiteNoiseBinsAreDecorrelated) {
  constexpr std::size_t kSeqs = 10000;
  constexpr std::size_t kLen = 64;
  constexpr std::size_t kHalf = kLen / 2;
  std::mt19937_64 gen(7);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<std::vector<double>> re(kHalf + 1, std::vector<double>(kSeqs));
  std::vector<double> power(kLen, 0.0);
  std::vector<double> x(kLen);
  for (std::size_t s = 0; s < kSeqs; ++s) {
    for (auto& v : x) v = noise(gen);
    const auto X = dft(x);
    for (std::size_t k = 0; k <= kHalf; ++k) re[k][s] = X[k].real();
    for (std::size_t k = 0; k < kLen; ++k) power[k] += std::norm(X[k]);
  }
  auto corr = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < kSeqs; ++i) {
      ma += a[i];
      mb += b[i];
    }
    ma /= kSeqs;
    mb /= kSeqs;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < kSeqs; ++i) {
      sab += (a[i] - ma) * (b[i] - mb);
      saa += (a[i] - ma) * (a[i] - ma);
      sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
  };
  double worst = 0.0;
  for (std::size_t k = 0; k <= kHalf; ++k) {
    for (std::size_t j = k + 1; j <= kHalf; ++j) worst = std::max(worst, std::abs(corr(re[k], re[j])));
  }
  EXPECT_LT(worst, 0.05);
  for (std::size_t k = 0; k < kLen; ++k) {
    EXPECT_TRUE(close_rel(power[k] / kSeqs, static_cast<double>(kLen), 0.05)) << "bin " << k;
  }
}
