#pragma once

#include <span>

#include "ddtime/models.hpp"
#include "ddtime/series.hpp"

namespace ddtime {

double mse(std::span<const double> actual, std::span<const double> predicted);
double mae(std::span<const double> actual, std::span<const double> predicted);

struct ForecastMetrics {
  double mse = 0.0;
  double mae = 0.0;
};

/// Errors averaged over every window, variable and horizon step.
ForecastMetrics evaluate_forecasts(const ModelSpec& spec, std::span<const double> params,
                                   const WindowedDataset& dataset);

}  // namespace ddtime
