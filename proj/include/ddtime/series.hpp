#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ddtime/matrix.hpp"

namespace ddtime {

/// A multivariate series stored as [variables x timesteps].
struct RawSeries {
  Matrix values;
  std::vector<std::string> variable_names;
  std::string source_path;

  std::size_t n_vars() const noexcept { return values.rows(); }
  std::size_t length() const noexcept { return values.cols(); }
};

struct StandardizationStats {
  std::vector<double> mean;
  std::vector<double> std;
  double epsilon = 1e-8;
};

struct WindowPair {
  Matrix input;   // [d x t_in]
  Matrix target;  // [d x t_out]
  std::size_t start_index = 0;
};

struct WindowedDataset {
  std::vector<WindowPair> pairs;
  std::size_t t_in = 0;
  std::size_t t_out = 0;
  std::size_t stride = 1;
  std::size_t n_vars = 0;

  std::size_t size() const noexcept { return pairs.size(); }
  bool empty() const noexcept { return pairs.empty(); }
};

enum class HeaderMode { detect, present, absent };

/// Delimited text layout: one timestep per row, one variable per column.
/// A zero delimiter means "comma unless the first line only has tabs".
struct TextFormat {
  char delimiter = 0;
  HeaderMode header = HeaderMode::detect;
};

RawSeries load_series(const std::filesystem::path& path, const TextFormat& format = {});

/// Population statistics of every variable.
StandardizationStats fit_standardization(const RawSeries& series, double epsilon = 1e-8);
RawSeries apply_standardization(const RawSeries& series, const StandardizationStats& stats);
RawSeries invert_standardization(const RawSeries& series, const StandardizationStats& stats);

struct StandardizedSeries {
  RawSeries series;
  StandardizationStats stats;
};
StandardizedSeries standardize(const RawSeries& series, double epsilon = 1e-8);

struct SeriesSplit {
  RawSeries train;
  RawSeries val;
  RawSeries test;
};

/// Chronological split: floor(train*L), floor(val*L), remainder to test.
SeriesSplit split(const RawSeries& series, std::array<double, 3> ratios = {0.70, 0.15, 0.15});

std::size_t window_count(std::size_t length, std::size_t t_in, std::size_t t_out,
                         std::size_t stride) noexcept;

WindowedDataset slide_windows(const RawSeries& series, std::size_t t_in, std::size_t t_out,
                              std::size_t stride);

/// Uniform sampling with replacement; returns window indices.
std::vector<std::size_t> sample_window_indices(const WindowedDataset& dataset, std::size_t count,
                                               std::uint64_t seed);
std::vector<WindowPair> sample_windows(const WindowedDataset& dataset, std::size_t count,
                                       std::uint64_t seed);

}  // namespace ddtime
