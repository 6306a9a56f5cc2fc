#include "ddtime/metrics.hpp"

#include <cmath>

#include "ddtime/error.hpp"

namespace ddtime {
namespace {

void check_pair(std::span<const double> a, std::span<const double> p) {
  if (a.size() != p.size()) throw Error(ErrorCode::length_mismatch, "actual and predicted differ in length");
  if (a.empty()) throw Error(ErrorCode::invalid_argument, "metric of an empty sequence");
}

}  // namespace

double mse(std::span<const double> actual, std::span<const double> predicted) {
  check_pair(actual, predicted);
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) sum += (actual[i] - predicted[i]) * (actual[i] - predicted[i]);
  return sum / static_cast<double>(actual.size());
}

double mae(std::span<const double> actual, std::span<const double> predicted) {
  check_pair(actual, predicted);
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) sum += std::abs(actual[i] - predicted[i]);
  return sum / static_cast<double>(actual.size());
}

ForecastMetrics evaluate_forecasts(const ModelSpec& spec, std::span<const double> params,
                                   const WindowedDataset& dataset) {
  if (dataset.empty()) throw Error(ErrorCode::empty_dataset, "no windows to evaluate on");
  double sq = 0.0;
  double ab = 0.0;
  std::size_t count = 0;
  for (const auto& pair : dataset.pairs) {
    const Matrix pred = forward(spec, params, pair.input);
    for (std::size_t k = 0; k < pred.size(); ++k) {
      const double e = pred.values()[k] - pair.target.values()[k];
      sq += e * e;
      ab += std::abs(e);
    }
    count += pred.size();
  }
  return {sq / static_cast<double>(count), ab / static_cast<double>(count)};
}

}  // namespace ddtime
