#include "ddtime/eval.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "ddtime/error.hpp"
#include "ddtime/rng.hpp"

namespace ddtime {
namespace {

SeedResult evaluate_seed(const std::vector<Row>& rows, const WindowedDataset& test_set, const ModelSpec& spec,
                         const EvalConfig& config, std::uint64_t seed) {
  SeedResult res{seed, 0.0, 0.0, false};
  try {
    const auto params = train_student(rows, spec, config, seed);
    const auto m = evaluate_forecasts(spec, params, test_set);
    res.mse = m.mse;
    res.mae = m.mae;
    res.diverged = !std::isfinite(m.mse) || !std::isfinite(m.mae);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::divergence) throw;
    res.diverged = true;
  }
  if (res.diverged) res.mse = res.mae = std::numeric_limits<double>::quiet_NaN();
  return res;
}

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / static_cast<double>(xs.size()))};
}

}  // namespace

ParameterVector train_student(std::span<const Row> rows, const ModelSpec& spec, const EvalConfig& config,
                              std::uint64_t seed) {
  ParameterVector params = init_params(spec, derive_seed(seed, seed_stream::student_init));
  ParameterVector grad(params.size());
  OptimizerState state = OptimizerState::sgd(params.size());
  const double momentum = config.optimizer == EvalOptimizer::sgd_momentum ? config.momentum : 0.0;
  for (std::size_t step = 0; step < config.steps; ++step) {
    const double loss = mse_loss_grad(spec, params, rows, grad);
    if (!std::isfinite(loss)) throw Error(ErrorCode::divergence, "student diverged at step " + std::to_string(step));
    sgd_momentum_step(params, grad, config.lr, momentum, state);
  }
  return params;
}

EvalReport train_and_eval(const SyntheticDataset& synthetic, const WindowedDataset& test_set,
                          const ModelSpec& spec, const EvalConfig& config, std::size_t n_real_train,
                          const IsibConfig& isib) {
  if (test_set.empty()) throw Error(ErrorCode::empty_dataset, "no test windows");
  if (config.seeds.empty()) throw Error(ErrorCode::invalid_argument, "evaluation needs at least one seed");
  const auto rows = synthetic.rows();

  EvalReport report;
  report.per_seed.resize(config.seeds.size());
  const std::size_t threads = std::max<std::size_t>(1, std::min(config.threads, config.seeds.size()));
  if (threads == 1) {
    for (std::size_t i = 0; i < config.seeds.size(); ++i) {
      report.per_seed[i] = evaluate_seed(rows, test_set, spec, config, config.seeds[i]);
    }
  } else {
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < config.seeds.size(); i += threads) {
            report.per_seed[i] = evaluate_seed(rows, test_set, spec, config, config.seeds[i]);
          }
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  std::vector<double> mses, maes;
  for (const auto& r : report.per_seed) {
    if (r.diverged) {
      ++report.diverged;
      continue;
    }
    mses.push_back(r.mse);
    maes.push_back(r.mae);
  }
  std::tie(report.mse_mean, report.mse_std) = mean_std(mses);
  std::tie(report.mae_mean, report.mae_std) = mean_std(maes);
  report.condensation_ratio = n_real_train > 0 ? static_cast<double>(synthetic.samples()) / static_cast<double>(n_real_train)
                                               : std::numeric_limits<double>::quiet_NaN();
  report.diversity = synthetic.samples() >= 2 ? diversity(synthetic, isib) : std::numeric_limits<double>::quiet_NaN();
  return report;
}

double diversity(const SyntheticDataset& synthetic, const IsibConfig& cfg) {
  if (synthetic.samples() < 2) throw Error(ErrorCode::invalid_argument, "diversity needs at least two samples");
  const auto views = synthetic.sample_views();
  return mean_sym_kl(views, cfg);
}

std::string report_to_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "seed,mse,mae,diverged\n";
  for (const auto& r : report.per_seed) {
    out << fmt::format("{},{:.17g},{:.17g},{}\n", r.seed, r.mse, r.mae, r.diverged ? 1 : 0);
  }
  out << fmt::format("mean,{:.17g},{:.17g},{}\n", report.mse_mean, report.mae_mean, report.diverged);
  out << fmt::format("std,{:.17g},{:.17g},{}\n", report.mse_std, report.mae_std, report.diverged);
  return out.str();
}

std::string report_summary(const EvalReport& report) {
  std::ostringstream out;
  out << fmt::format("students       : {} ({} diverged)\n", report.per_seed.size(), report.diverged);
  out << fmt::format("test MSE       : {:.6f} +/- {:.6f}\n", report.mse_mean, report.mse_std);
  out << fmt::format("test MAE       : {:.6f} +/- {:.6f}\n", report.mae_mean, report.mae_std);
  out << fmt::format("condensation r : {:.6f}\n", report.condensation_ratio);
  out << fmt::format("diversity D_KL : {:.6f}\n", report.diversity);
  return out.str();
}

}  // namespace ddtime
