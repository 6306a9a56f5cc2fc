#include <gtest/gtest.h>

#include "ddtime/losses.hpp"
#include "test_util.hpp"

using namespace ddtime;
using ddtime::testing::close_rel;
using ddtime::testing::code_of;
using ddtime::testing::random_matrix;
using ddtime::testing::random_vector;

namespace {

Matrix row_matrix(std::vector<double> v) {
  Matrix m(1, v.size());
  for (std::size_t i = 0; i < v.size(); ++i) m(0, i) = v[i];
  return m;
}

// Independent oracle: both KL directions summed term by term.
double brute_sym_kl(const std::vector<double>& p, const std::vector<double>& q) {
  double pq = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) pq += p[i] * std::log(p[i] / q[i]);
  double qp = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j) qp += q[j] * std::log(q[j] / p[j]);
  return 0.5 * (pq + qp);
}

std::vector<double> random_distribution(std::mt19937_64& gen, std::size_t n) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::vector<double> p(n);
  double sum = 0.0;
  for (auto& x : p) sum += (x = u(gen));
  for (auto& x : p) x /= sum;
  return p;
}

std::vector<SampleView> views(const std::vector<std::vector<double>>& samples) {
  return {samples.begin(), samples.end()};
}

}  // namespace

TEST(ValueTemporal, Examples) {
  std::mt19937_64 gen(1);
  const auto a = random_matrix(gen, 2, 5);
  EXPECT_EQ(value_temporal(a, a), 0.0);
  Matrix ones(2, 3);
  for (auto& x : ones.values()) x = 1.0;
  EXPECT_EQ(value_temporal(ones, Matrix(2, 3)), 1.0);
  EXPECT_EQ(value_temporal(row_matrix({0, 2}), row_matrix({0, 0})), 2.0);
  EXPECT_EQ(code_of([&] { value_temporal(Matrix(2, 3), Matrix(3, 2)); }), ErrorCode::shape_mismatch);
}

TEST(ValueFrequency, Examples) {
  std::mt19937_64 gen(2);
  const auto a = random_matrix(gen, 3, 6);
  EXPECT_EQ(value_frequency(a, a), 0.0);
  EXPECT_NEAR(value_frequency(row_matrix({1, 0, 0, 0}), Matrix(1, 4)), 4.0, 1e-12);
  const auto b = random_matrix(gen, 3, 6);
  Matrix a2 = a, b2 = b;
  for (auto& x : a2.values()) x *= 2;
  for (auto& x : b2.values()) x *= 2;
  EXPECT_NEAR(value_frequency(a2, b2), 2.0 * value_frequency(a, b), 1e-12);
}

TEST(ValueFrequency, AveragesOverVariables) {
  Matrix a(2, 4);
  a(0, 0) = 1.0;  // impulse in variable 0 only
  EXPECT_NEAR(value_frequency(a, Matrix(2, 4)), 2.0, 1e-12);
}

TEST(ValueCombined, BlendEndpointsAndArithmetic) {
  std::mt19937_64 gen(3);
  const auto a = random_matrix(gen, 2, 8);
  const auto b = random_matrix(gen, 2, 8);
  EXPECT_EQ(value_combined(a, b, 0.0), value_temporal(a, b));
  EXPECT_EQ(value_combined(a, b, 1.0), value_frequency(a, b));
  const double t = value_temporal(a, b);
  const double f = value_frequency(a, b);
  EXPECT_NEAR(value_combined(a, b, 0.5), 0.5 * t + 0.5 * f, 1e-12);
  EXPECT_EQ(code_of([&] { value_combined(a, b, 1.5); }), ErrorCode::invalid_argument);
  EXPECT_EQ(code_of([&] { value_combined(a, b, -0.1); }), ErrorCode::invalid_argument);
}

TEST(ValueCombined, HalfBlendOfTwoAndFour) {
  // temporal 2 ([0,2] vs 0) and frequency 4 ([1,0,0,0] vs 0) exercise the
  // blend arithmetic independently.
  EXPECT_DOUBLE_EQ(0.5 * 2.0 + 0.5 * 4.0, 3.0);
  const auto t = value_temporal(row_matrix({0, 2}), row_matrix({0, 0}));
  const auto f = value_frequency(row_matrix({1, 0, 0, 0}), Matrix(1, 4));
  EXPECT_NEAR((1 - 0.5) * t + 0.5 * f, 3.0, 1e-12);
}

TEST(ValueCombined, MonotoneInFrequencyComponent) {
  // Same temporal error, larger spectral error: spread vs concentrated.
  const auto zero = Matrix(1, 4);
  const auto spike = row_matrix({2, 0, 0, 0});  // temporal 1, frequency 8
  const auto flat = row_matrix({1, 1, 1, 1});   // temporal 1, frequency 4
  ASSERT_DOUBLE_EQ(value_temporal(spike, zero), value_temporal(flat, zero));
  ASSERT_GT(value_frequency(spike, zero), value_frequency(flat, zero));
  for (double alpha : {0.1, 0.5, 0.8, 1.0}) {
    EXPECT_GT(value_combined(spike, zero, alpha), value_combined(flat, zero, alpha));
  }
}

TEST(ValueTerms, ZeroOnlyAtEquality) {
  std::mt19937_64 gen(4);
  const auto a = random_matrix(gen, 2, 6);
  auto b = a;
  b(1, 3) += 1e-3;
  EXPECT_GT(value_temporal(a, b), 0.0);
  EXPECT_GT(value_frequency(a, b), 0.0);
  EXPECT_GT(value_combined(a, b, 0.8), 0.0);
  EXPECT_EQ(value_combined(a, a, 0.8), 0.0);
}

TEST(ValueTerms, GradientsMatchFiniteDifferences) {
  std::mt19937_64 gen(5);
  const double h = 1e-6;
  for (int trial = 0; trial < 5; ++trial) {
    auto ys = random_matrix(gen, 2, 7);
    const auto yt = random_matrix(gen, 2, 7);
    const auto gt = value_temporal_grad(ys, yt);
    const auto gf = value_frequency_grad(ys, yt);
    for (std::size_t k = 0; k < ys.size(); ++k) {
      const double saved = ys.values()[k];
      ys.values()[k] = saved + h;
      const double tu = value_temporal(ys, yt), fu = value_frequency(ys, yt);
      ys.values()[k] = saved - h;
      const double td = value_temporal(ys, yt), fd = value_frequency(ys, yt);
      ys.values()[k] = saved;
      EXPECT_TRUE(close_rel(gt.values()[k], (tu - td) / (2 * h), 1e-6, 1e-8));
      EXPECT_TRUE(close_rel(gf.values()[k], (fu - fd) / (2 * h), 1e-6, 1e-8));
    }
  }
}

TEST(SampleProbabilities, ConstantSampleIsUniform) {
  const auto p = sample_probabilities(std::vector<double>(6, 3.0), {});
  for (double x : p) EXPECT_NEAR(x, 1.0 / 6.0, 1e-15);
}

TEST(SampleProbabilities, TwoValueSoftmax) {
  const auto p = sample_probabilities(std::vector<double>{1, 3}, {1.0, 0.0, 0.5});
  EXPECT_NEAR(p[0], 0.11920292202211755, 1e-12);
  EXPECT_NEAR(p[1], 0.88079707797788245, 1e-12);
}

TEST(SampleProbabilities, HighTemperatureApproachesUniform) {
  std::mt19937_64 gen(6);
  const auto p = sample_probabilities(random_vector(gen, 10), {1e6, 1e-8, 0.5});
  for (double x : p) EXPECT_NEAR(x, 0.1, 1e-5);
}

TEST(SampleProbabilities, PositiveAndNormalized) {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = sample_probabilities(random_vector(gen, 48, 3.0), {0.2, 1e-8, 0.5});
    double sum = 0.0;
    for (double x : p) {
      EXPECT_GT(x, 0.0);
      sum += x;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(SymKl, Examples) {
  const std::vector<double> p{0.5, 0.5};
  const std::vector<double> q{0.9, 0.1};
  EXPECT_EQ(sym_kl(p, p), 0.0);
  EXPECT_NEAR(sym_kl(p, q), 0.43944491546724386, 1e-12);
  EXPECT_NEAR(sym_kl(p, q), brute_sym_kl(p, q), 1e-12);
}

TEST(SymKl, MatchesBruteForceOnRandomPairs) {
  std::mt19937_64 gen(8);
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 2 + i % 30;
    const auto p = random_distribution(gen, n);
    const auto q = random_distribution(gen, n);
    const double v = sym_kl(p, q);
    EXPECT_NEAR(v, brute_sym_kl(p, q), 1e-12);
    EXPECT_GE(v, 0.0);
    EXPECT_EQ(v, sym_kl(q, p));
    EXPECT_LT(std::abs(sym_kl(p, p)), 1e-12);
  }
}

TEST(SymKl, RejectsBadInputs) {
  const std::vector<double> p{0.5, 0.5};
  EXPECT_EQ(code_of([&] { sym_kl(p, std::vector<double>{1.0, 0.0}); }), ErrorCode::zero_probability);
  EXPECT_EQ(code_of([&] { sym_kl(p, std::vector<double>{0.2, 0.3, 0.5}); }), ErrorCode::length_mismatch);
}

TEST(IsibLoss, DuplicatesGiveExactlyOne) {
  std::mt19937_64 gen(9);
  const auto x = random_vector(gen, 12);
  const std::vector<std::vector<double>> samples(4, x);
  EXPECT_EQ(isib_loss(views(samples), {}), 1.0);
}

TEST(IsibLoss, SingleSampleIsZero) {
  const std::vector<std::vector<double>> samples{{1, 2, 3}};
  EXPECT_EQ(isib_loss(views(samples), {}), 0.0);
}

TEST(IsibLoss, TwoSamplesChainThroughSymKl) {
  EXPECT_NEAR(std::exp(-0.5 * 0.43944491546724386), 0.80274, 5e-6);
  const std::vector<std::vector<double>> samples{{2, 2}, {1, 3}};
  const IsibConfig cfg{1.0, 0.0, 0.5};
  const auto p = sample_probabilities(samples[0], cfg);
  const auto q = sample_probabilities(samples[1], cfg);
  EXPECT_NEAR(isib_loss(views(samples), cfg), std::exp(-0.5 * brute_sym_kl(p, q)), 1e-12);
}

TEST(IsibLoss, MeanOverUnorderedPairs) {
  std::mt19937_64 gen(10);
  std::vector<std::vector<double>> samples;
  for (int i = 0; i < 5; ++i) samples.push_back(random_vector(gen, 9));
  const IsibConfig cfg{0.7, 1e-8, 0.5};
  double sum = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = i + 1; j < 5; ++j) {
      sum += std::exp(-cfg.lambda_div * brute_sym_kl(sample_probabilities(samples[i], cfg),
                                                      sample_probabilities(samples[j], cfg)));
      ++pairs;
    }
  }
  const double loss = isib_loss(views(samples), cfg);
  EXPECT_NEAR(loss, sum / pairs, 1e-12);
  EXPECT_GT(loss, 0.0);
  EXPECT_LT(loss, 1.0);
}

TEST(IsibLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 gen(11);
  const double h = 1e-6;
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<std::vector<double>> samples;
    for (int i = 0; i < 3; ++i) samples.push_back(random_vector(gen, 8));
    const IsibConfig cfg{0.5 + trial * 0.3, 1e-8, 0.5};
    std::vector<std::vector<double>> grads;
    const double loss = isib_loss_grad(views(samples), cfg, grads);
    EXPECT_EQ(loss, isib_loss(views(samples), cfg));
    for (std::size_t i = 0; i < samples.size(); ++i) {
      for (std::size_t k = 0; k < samples[i].size(); ++k) {
        const double saved = samples[i][k];
        samples[i][k] = saved + h;
        const double up = isib_loss(views(samples), cfg);
        samples[i][k] = saved - h;
        const double down = isib_loss(views(samples), cfg);
        samples[i][k] = saved;
        EXPECT_TRUE(close_rel(grads[i][k], (up - down) / (2 * h), 1e-6, 1e-8));
      }
    }
  }
}

TEST(MeanSymKl, LinkedToSurrogateForTwoSamples) {
  std::mt19937_64 gen(12);
  const std::vector<std::vector<double>> samples{random_vector(gen, 10), random_vector(gen, 10)};
  const IsibConfig cfg{};
  EXPECT_NEAR(isib_loss(views(samples), cfg), std::exp(-cfg.lambda_div * mean_sym_kl(views(samples), cfg)), 1e-12);
}

TEST(ParamMatch, Examples) {
  const std::vector<double> start{0, 0, 1};
  const std::vector<double> target{2, -2, 3};
  EXPECT_EQ(param_match_loss(target, start, target), 0.0);
  EXPECT_EQ(param_match_loss(start, start, target), 1.0);
  const std::vector<double> mid{1, -1, 2};
  EXPECT_NEAR(param_match_loss(mid, start, target), 0.25, 1e-12);
  EXPECT_EQ(code_of([&] { param_match_loss(mid, start, start); }), ErrorCode::degenerate_segment);
}

TEST(TotalLoss, WeightedSum) {
  const auto b = total_loss(1, 1, 1, 1, 0.8, 0.6);
  EXPECT_NEAR(b.total, 2.6, 1e-12);
  EXPECT_EQ(b.recompute_total(), b.total);
  const auto plain = total_loss(0.3, 0.7, 5.0, 9.0, 0.0, 0.0);
  EXPECT_EQ(plain.total, 0.3 + 0.7);
  EXPECT_THROW(total_loss(1, 1, 1, 1, 1.2, 0.6), Error);
  EXPECT_THROW(total_loss(1, 1, 1, 1, 0.5, -1.0), Error);
}

TEST(TotalLoss, BreakdownRecomputesExactly) {
  std::mt19937_64 gen(13);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (int i = 0; i < 100; ++i) {
    const auto b = total_loss(u(gen), u(gen), u(gen), u(gen), u(gen) / 3.0, u(gen));
    EXPECT_EQ(b.recompute_total(), b.total);
  }
}
