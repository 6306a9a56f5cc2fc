#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ddtime/losses.hpp"
#include "ddtime/metrics.hpp"
#include "ddtime/models.hpp"
#include "ddtime/series.hpp"
#include "ddtime/synthetic.hpp"

namespace ddtime {

enum class EvalOptimizer { gd, sgd_momentum };

struct EvalConfig {
  std::size_t steps = 500;
  double lr = 3e-4;
  EvalOptimizer optimizer = EvalOptimizer::gd;
  double momentum = 0.9;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::size_t threads = 1;
};

/// Full-batch training of a freshly initialized student on `rows`.
/// Throws ErrorCode::divergence if the loss goes non-finite.
ParameterVector train_student(std::span<const Row> rows, const ModelSpec& spec, const EvalConfig& config,
                              std::uint64_t seed);

struct SeedResult {
  std::uint64_t seed = 0;
  double mse = 0.0;
  double mae = 0.0;
  bool diverged = false;
};

struct EvalReport {
  std::vector<SeedResult> per_seed;
  double mse_mean = 0.0;
  double mse_std = 0.0;
  double mae_mean = 0.0;
  double mae_std = 0.0;
  std::size_t diverged = 0;
  double condensation_ratio = 0.0;
  double diversity = 0.0;  // NaN for a single-sample set
};

/// Trains one student per seed on the synthetic pairs and scores it on
/// `test_set`. Diverged seeds are reported but left out of the means.
/// `n_real_train` is the real training window count behind the ratio.
EvalReport train_and_eval(const SyntheticDataset& synthetic, const WindowedDataset& test_set,
                          const ModelSpec& spec, const EvalConfig& config, std::size_t n_real_train,
                          const IsibConfig& isib = {});

/// Mean pairwise symmetric KL of the per-sample softmax distributions.
double diversity(const SyntheticDataset& synthetic, const IsibConfig& cfg);

/// seed,mse,mae,diverged rows followed by summary rows.
std::string report_to_csv(const EvalReport& report);
std::string report_summary(const EvalReport& report);

}  // namespace ddtime
