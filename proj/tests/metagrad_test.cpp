#include <gtest/gtest.h>

#include "ddtime/metagrad.hpp"
#include "test_util.hpp"

using namespace ddtime;
using ddtime::testing::close_rel;
using ddtime::testing::code_of;
using ddtime::testing::random_synthetic;
using ddtime::testing::random_vector;

namespace {

struct Segment {
  ParameterVector start, target, teacher;
  SegmentRef ref() const { return {start, target, start, target, teacher}; }
};

Segment random_segment(std::mt19937_64& gen, const ModelSpec& spec) {
  Segment s;
  s.start = random_vector(gen, parameter_count(spec), 0.5);
  s.target = s.start;
  for (double& x : s.target) x += std::normal_distribution<double>(0.0, 0.05)(gen);
  s.teacher = s.target;
  return s;
}

void expect_matches_fd(const SyntheticGradient& analytic, const SyntheticGradient& fd, double rel) {
  ASSERT_EQ(analytic.d_inputs.size(), fd.d_inputs.size());
  ASSERT_EQ(analytic.d_targets.size(), fd.d_targets.size());
  for (std::size_t k = 0; k < fd.d_inputs.size(); ++k) {
    EXPECT_TRUE(close_rel(analytic.d_inputs[k], fd.d_inputs[k], rel, 1e-8)) << "input entry " << k;
  }
  for (std::size_t k = 0; k < fd.d_targets.size(); ++k) {
    EXPECT_TRUE(close_rel(analytic.d_targets[k], fd.d_targets[k], rel, 1e-8)) << "target entry " << k;
  }
}

void check_instance(const ModelSpec& spec, const SyntheticDataset& data, const Segment& seg,
                    const ObjectiveSettings& settings, std::span<const WindowPair> real) {
  const auto res = evaluate_objective(spec, data, seg.ref(), settings, real, true);
  auto objective = [&](const SyntheticDataset& d) {
    return evaluate_objective(spec, d, seg.ref(), settings, real, false).breakdown.total;
  };
  EXPECT_EQ(objective(data), res.breakdown.total);
  expect_matches_fd(res.grad, finite_diff_synthetic(objective, data, 1e-4), 1e-4);
}

}  // namespace

TEST(Unroll, FixedPointStaysPut) {
  const ModelSpec spec{ModelKind::channel_linear, 2, 2, 1, {}};
  std::mt19937_64 gen(1);
  auto data = random_synthetic(gen, 3, 1, 2, 2);
  const auto theta = init_params(spec, 4);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto y = forward_row(spec, theta, data.input_row(i, 0));
    auto t = data.target_row(i, 0);
    std::copy(y.begin(), y.end(), t.begin());
  }
  const auto res = unroll_student(theta, data, spec, 5, 0.1);
  for (std::size_t k = 0; k < theta.size(); ++k) EXPECT_NEAR(res.theta_final[k], theta[k], 1e-15);
}

// One sample x=1, y=0: the forecast s = w + b contracts by (1 - 4 lr) per
// step because both the weight and the bias move by 2 s lr.
TEST(Unroll, GeometricRecursionOnScalarModel) {
  const ModelSpec spec{ModelKind::channel_linear, 1, 1, 1, {}};
  const SyntheticDataset data(1, 1, 1, 1, {1.0, 0.0});
  const auto res = unroll_student({1.0, 0.0}, data, spec, 2, 0.05);
  EXPECT_NEAR(res.theta_final[0] + res.theta_final[1], 0.64, 1e-15);
  EXPECT_NEAR(res.theta_final[0], 1.0 - 0.05 * 2.0 * (1.0 + 0.8), 1e-15);
  EXPECT_EQ(res.trace.steps(), 2u);
}

TEST(Unroll, ReplayIsBitExact) {
  const ModelSpec spec{ModelKind::mlp, 3, 2, 2, {4}};
  std::mt19937_64 gen(2);
  const auto data = random_synthetic(gen, 3, 2, 3, 2);
  const auto theta = init_params(spec, 5);
  const auto a = unroll_student(theta, data, spec, 7, 0.05);
  const auto b = unroll_student(theta, data, spec, 7, 0.05);
  EXPECT_EQ(a.theta_final, b.theta_final);
  EXPECT_EQ(replay(a.trace), a.theta_final);
}

TEST(Unroll, RejectsZeroStepsAndDivergence) {
  const ModelSpec spec{ModelKind::channel_linear, 2, 2, 1, {}};
  std::mt19937_64 gen(3);
  const auto data = random_synthetic(gen, 2, 1, 2, 2, 10.0);
  EXPECT_THROW(unroll_student(init_params(spec, 0), data, spec, 0, 0.1), Error);
  EXPECT_EQ(code_of([&] { unroll_student(init_params(spec, 0), data, spec, 200, 50.0); }), ErrorCode::divergence);
}

TEST(Unroll, TraceStorageBound) {
  const ModelSpec spec{ModelKind::mlp, 4, 3, 2, {5}};
  std::mt19937_64 gen(4);
  const auto data = random_synthetic(gen, 3, 2, 4, 3);
  const std::size_t p = parameter_count(spec);
  for (std::size_t k : {1u, 5u, 20u}) {
    const auto res = unroll_student(init_params(spec, 1), data, spec, k, 1e-3);
    EXPECT_EQ(res.trace.stored_values(), k * p + data.data().size());
  }
}

TEST(Backprop, NoStepsReturnsDirectGradients) {
  const ModelSpec spec{ModelKind::channel_linear, 2, 2, 1, {}};
  std::mt19937_64 gen(5);
  const auto data = random_synthetic(gen, 2, 1, 2, 2);
  const UnrollTrace trace{spec, data, {}, 0.1};
  auto direct = SyntheticGradient::zeros_like(data);
  direct.d_inputs = random_vector(gen, direct.d_inputs.size());
  direct.d_targets = random_vector(gen, direct.d_targets.size());
  const auto out = backprop_to_synthetic(trace, random_vector(gen, parameter_count(spec)), direct);
  EXPECT_EQ(out.d_inputs, direct.d_inputs);
  EXPECT_EQ(out.d_targets, direct.d_targets);
}

TEST(Backprop, ZeroSeedGivesZeroGradient) {
  const ModelSpec spec{ModelKind::mlp, 2, 2, 1, {3}};
  std::mt19937_64 gen(6);
  const auto data = random_synthetic(gen, 2, 1, 2, 2);
  const auto res = unroll_student(init_params(spec, 2), data, spec, 3, 0.1);
  const auto out = backprop_to_synthetic(res.trace, ParameterVector(parameter_count(spec), 0.0),
                                         SyntheticGradient::zeros_like(data));
  for (double g : out.d_inputs) EXPECT_EQ(g, 0.0);
  for (double g : out.d_targets) EXPECT_EQ(g, 0.0);
}

TEST(Backprop, RejectsMismatchedShapes) {
  const ModelSpec spec{ModelKind::channel_linear, 2, 2, 1, {}};
  std::mt19937_64 gen(7);
  const auto data = random_synthetic(gen, 2, 1, 2, 2);
  const auto res = unroll_student(init_params(spec, 2), data, spec, 2, 0.1);
  EXPECT_THROW(backprop_to_synthetic(res.trace, ParameterVector(3, 0.0), SyntheticGradient::zeros_like(data)), Error);
  const auto other = random_synthetic(gen, 3, 1, 2, 2);
  EXPECT_THROW(backprop_to_synthetic(res.trace, ParameterVector(parameter_count(spec), 0.0),
                                     SyntheticGradient::zeros_like(other)),
               Error);
}

TEST(FiniteDiff, QuadraticAndConstantObjectives) {
  std::mt19937_64 gen(8);
  const auto data = random_synthetic(gen, 2, 2, 3, 2);
  auto quadratic = [](const SyntheticDataset& d) {
    double s = 0.0;
    for (double x : d.data()) s += x * x;
    return s;
  };
  const auto g = finite_diff_synthetic(quadratic, data, 1e-4);
  const auto flat = g.flattened();
  for (std::size_t k = 0; k < flat.size(); ++k) EXPECT_NEAR(flat[k], 2.0 * data.data()[k], 1e-9);
  const auto z = finite_diff_synthetic([](const SyntheticDataset&) { return 3.0; }, data, 1e-4);
  for (double x : z.flattened()) EXPECT_EQ(x, 0.0);
}

TEST(MetaGradient, TinyLinearInstanceMatchesFiniteDifferences) {
  const ModelSpec spec{ModelKind::channel_linear, 2, 2, 1, {}};
  std::mt19937_64 gen(9);
  const auto data = random_synthetic(gen, 2, 1, 2, 2);
  const auto seg = random_segment(gen, spec);
  ObjectiveSettings settings;
  settings.unroll_steps = 3;
  settings.student_lr = 0.1;
  check_instance(spec, data, seg, settings, {});
}

TEST(MetaGradient, RandomInstancesAcrossKindsAndSteps) {
  std::mt19937_64 gen(10);
  for (std::size_t i = 0; i < 10; ++i) {
    const bool mlp = i % 2 == 1;
    const ModelSpec spec = mlp ? ModelSpec{ModelKind::mlp, 3, 2, 2, {3}} : ModelSpec{ModelKind::channel_linear, 3, 2, 2, {}};
    const auto data = random_synthetic(gen, 3, 2, 3, 2);
    const auto seg = random_segment(gen, spec);
    ObjectiveSettings settings;
    settings.unroll_steps = std::array<std::size_t, 3>{1, 3, 5}[i % 3];
    settings.student_lr = 0.05;
    settings.isib.tau = 0.8;
    SCOPED_TRACE("instance " + std::to_string(i));
    check_instance(spec, data, seg, settings, {});
  }
}

TEST(MetaGradient, RealValueInputsMatchFiniteDifferences) {
  const ModelSpec spec{ModelKind::mlp, 3, 2, 1, {4}};
  std::mt19937_64 gen(11);
  const auto data = random_synthetic(gen, 2, 1, 3, 2);
  std::vector<WindowPair> real;
  for (int i = 0; i < 4; ++i) {
    real.push_back({ddtime::testing::random_matrix(gen, 1, 3), ddtime::testing::random_matrix(gen, 1, 2), 0});
  }
  const auto seg = random_segment(gen, spec);
  ObjectiveSettings settings;
  settings.unroll_steps = 4;
  settings.student_lr = 0.05;
  settings.value_source = ValueInputSource::real;
  check_instance(spec, data, seg, settings, real);
}

TEST(MetaGradient, DisabledTermsReduceTheTotal) {
  const ModelSpec spec{ModelKind::channel_linear, 3, 2, 1, {}};
  std::mt19937_64 gen(12);
  const auto data = random_synthetic(gen, 3, 1, 3, 2);
  const auto seg = random_segment(gen, spec);
  ObjectiveSettings settings;
  settings.alpha = 0.0;
  settings.lambda_is = 0.0;
  settings.unroll_steps = 2;
  const auto res = evaluate_objective(spec, data, seg.ref(), settings, {}, false);
  EXPECT_EQ(res.breakdown.total, res.breakdown.l_param + res.breakdown.l_val_tmp);
  EXPECT_GT(res.breakdown.l_val_fre, 0.0);
  EXPECT_GT(res.breakdown.l_is, 0.0);
}

// Every sample shapes the student, so the parameter path couples all of
// them; the diversity term adds direct cross-sample coupling of its own.
TEST(MetaGradient, CouplingAcrossSamples) {
  const ModelSpec spec{ModelKind::channel_linear, 3, 2, 1, {}};
  std::mt19937_64 gen(13);
  const auto data = random_synthetic(gen, 3, 1, 3, 2);
  const auto seg = random_segment(gen, spec);
  auto perturbed = data;
  for (std::size_t k = 2 * 5; k < 3 * 5; ++k) perturbed.data()[k] += 0.3 * static_cast<double>(k % 5);  // sample 2 only

  ObjectiveSettings path_only;
  path_only.lambda_is = 0.0;
  path_only.unroll_steps = 3;
  path_only.student_lr = 0.1;
  const auto a = evaluate_objective(spec, data, seg.ref(), path_only, {}, true).grad;
  const auto b = evaluate_objective(spec, perturbed, seg.ref(), path_only, {}, true).grad;
  double change = 0.0;
  for (std::size_t k = 0; k < 2 * 3; ++k) change += std::abs(a.d_inputs[k] - b.d_inputs[k]);
  EXPECT_GT(change, 1e-6);

  const IsibConfig cfg{};
  std::vector<std::vector<double>> g0, g1, g2;
  isib_loss_grad(data.sample_views(), cfg, g0);
  isib_loss_grad(perturbed.sample_views(), cfg, g1);
  double cross = 0.0;
  for (std::size_t k = 0; k < g0[0].size(); ++k) cross += std::abs(g0[0][k] - g1[0][k]);
  EXPECT_GT(cross, 1e-6);

  // Without the diversity term nothing reaches sample 0 directly: with a
  // single-sample dataset the only direct path left is the value term.
  const SyntheticDataset one(1, 1, 3, 2, std::vector<double>(data.data().begin(), data.data().begin() + 5));
  isib_loss_grad(one.sample_views(), cfg, g2);
  for (double g : g2[0]) EXPECT_EQ(g, 0.0);
}

TEST(SyntheticGradient, FlattenedInterleavesSlices) {
  const SyntheticDataset data(2, 1, 2, 1);
  auto g = SyntheticGradient::zeros_like(data);
  g.d_inputs = {1, 2, 4, 5};
  g.d_targets = {3, 6};
  EXPECT_EQ(g.flattened(), (std::vector<double>{1, 2, 3, 4, 5, 6}));
  EXPECT_NEAR(g.norm(), std::sqrt(91.0), 1e-12);
}
