#include "ddtime/series.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <string_view>

#include "ddtime/error.hpp"
#include "ddtime/rng.hpp"

namespace ddtime {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_line(std::string_view line, char delim) {
  std::vector<std::string_view> cells;
  std::size_t begin = 0;
  while (true) {
    const std::size_t pos = line.find(delim, begin);
    if (pos == std::string_view::npos) {
      cells.push_back(trim(line.substr(begin)));
      break;
    }
    cells.push_back(trim(line.substr(begin, pos - begin)));
    begin = pos + 1;
  }
  return cells;
}

bool parse_number(std::string_view cell, double& out) {
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  if (cell.empty()) return false;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  return ec == std::errc() && ptr == cell.data() + cell.size();
}

bool all_numeric(const std::vector<std::string_view>& cells) {
  double unused;
  for (auto c : cells) {
    if (!parse_number(c, unused)) return false;
  }
  return true;
}

RawSeries column_slice(const RawSeries& s, std::size_t begin, std::size_t end) {
  return RawSeries{s.values.col_slice(begin, end), s.variable_names, s.source_path};
}

}  // namespace

RawSeries load_series(const std::filesystem::path& path, const TextFormat& format) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::missing_file, path.string());

  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!trim(line).empty()) lines.push_back(std::move(line));
  }
  if (lines.empty()) throw Error(ErrorCode::empty_file, path.string());

  char delim = format.delimiter;
  if (delim == 0) {
    const auto& first = lines.front();
    delim = (first.find(',') == std::string::npos && first.find('\t') != std::string::npos) ? '\t' : ',';
  }

  std::size_t first_data = 0;
  std::vector<std::string> names;
  const auto head = split_line(lines.front(), delim);
  const bool has_header = format.header == HeaderMode::present ||
                          (format.header == HeaderMode::detect && !all_numeric(head));
  if (has_header) {
    for (auto c : head) names.emplace_back(c);
    first_data = 1;
  }
  if (first_data >= lines.size()) throw Error(ErrorCode::empty_file, path.string() + ": header only");

  const std::size_t n_cols = has_header ? names.size() : head.size();
  const std::size_t n_rows = lines.size() - first_data;
  Matrix values(n_cols, n_rows);
  for (std::size_t t = 0; t < n_rows; ++t) {
    const auto cells = split_line(lines[first_data + t], delim);
    if (cells.size() != n_cols) {
      throw Error(ErrorCode::ragged_rows, path.string() + ": row " + std::to_string(first_data + t + 1) +
                                              " has " + std::to_string(cells.size()) + " cells, expected " +
                                              std::to_string(n_cols));
    }
    for (std::size_t v = 0; v < n_cols; ++v) {
      double x;
      if (!parse_number(cells[v], x)) {
        throw Error(ErrorCode::non_numeric_cell, path.string() + ": '" + std::string(cells[v]) + "' at row " +
                                                     std::to_string(first_data + t + 1));
      }
      if (!std::isfinite(x)) {
        throw Error(ErrorCode::non_finite_value, path.string() + ": row " + std::to_string(first_data + t + 1));
      }
      values(v, t) = x;
    }
  }
  if (names.empty()) {
    for (std::size_t v = 0; v < n_cols; ++v) names.push_back("v" + std::to_string(v));
  }
  return RawSeries{std::move(values), std::move(names), path.string()};
}

StandardizationStats fit_standardization(const RawSeries& series, double epsilon) {
  const std::size_t d = series.n_vars();
  const std::size_t n = series.length();
  if (n == 0) throw Error(ErrorCode::invalid_argument, "cannot standardize an empty series");
  StandardizationStats stats{std::vector<double>(d), std::vector<double>(d), epsilon};
  for (std::size_t v = 0; v < d; ++v) {
    const auto row = series.values.row(v);
    double mean = 0.0;
    for (double x : row) mean += x;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double x : row) var += (x - mean) * (x - mean);
    var /= static_cast<double>(n);
    stats.mean[v] = mean;
    stats.std[v] = std::sqrt(var);
    if (!(stats.std[v] + epsilon > 0.0)) {
      throw Error(ErrorCode::invalid_argument,
                  "variable " + std::to_string(v) + " is constant; use a positive epsilon");
    }
  }
  return stats;
}

RawSeries apply_standardization(const RawSeries& series, const StandardizationStats& stats) {
  if (stats.mean.size() != series.n_vars()) {
    throw Error(ErrorCode::shape_mismatch, "standardization stats do not match variable count");
  }
  RawSeries out = series;
  for (std::size_t v = 0; v < series.n_vars(); ++v) {
    const double scale = stats.std[v] + stats.epsilon;
    for (double& x : out.values.row(v)) x = (x - stats.mean[v]) / scale;
  }
  return out;
}

RawSeries invert_standardization(const RawSeries& series, const StandardizationStats& stats) {
  if (stats.mean.size() != series.n_vars()) {
    throw Error(ErrorCode::shape_mismatch, "standardization stats do not match variable count");
  }
  RawSeries out = series;
  for (std::size_t v = 0; v < series.n_vars(); ++v) {
    const double scale = stats.std[v] + stats.epsilon;
    for (double& x : out.values.row(v)) x = stats.mean[v] + scale * x;
  }
  return out;
}

StandardizedSeries standardize(const RawSeries& series, double epsilon) {
  auto stats = fit_standardization(series, epsilon);
  auto out = apply_standardization(series, stats);
  return {std::move(out), std::move(stats)};
}

SeriesSplit split(const RawSeries& series, std::array<double, 3> ratios) {
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r > 0.0)) throw Error(ErrorCode::invalid_argument, "split ratios must be positive");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::invalid_argument, "split ratios must sum to 1");

  const auto len = static_cast<double>(series.length());
  // The nudge absorbs products like 0.7 * L landing a hair below an integer.
  const auto n_train = static_cast<std::size_t>(std::floor(ratios[0] * len + 1e-9));
  const auto n_val = static_cast<std::size_t>(std::floor(ratios[1] * len + 1e-9));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= series.length()) {
    throw Error(ErrorCode::empty_split, "series of length " + std::to_string(series.length()) +
                                            " leaves an empty segment");
  }
  return {column_slice(series, 0, n_train), column_slice(series, n_train, n_train + n_val),
          column_slice(series, n_train + n_val, series.length())};
}

std::size_t window_count(std::size_t length, std::size_t t_in, std::size_t t_out,
                         std::size_t stride) noexcept {
  if (stride == 0 || length < t_in + t_out) return 0;
  return (length - t_in - t_out) / stride + 1;
}

WindowedDataset slide_windows(const RawSeries& series, std::size_t t_in, std::size_t t_out,
                              std::size_t stride) {
  if (t_in == 0 || t_out == 0 || stride == 0) {
    throw Error(ErrorCode::invalid_argument, "t_in, t_out and stride must be at least 1");
  }
  WindowedDataset ds;
  ds.t_in = t_in;
  ds.t_out = t_out;
  ds.stride = stride;
  ds.n_vars = series.n_vars();
  const std::size_t len = series.length();
  for (std::size_t i = 0; i + t_in + t_out <= len; i += stride) {
    ds.pairs.push_back({series.values.col_slice(i, i + t_in),
                        series.values.col_slice(i + t_in, i + t_in + t_out), i});
  }
  if (ds.pairs.empty()) {
    throw Error(ErrorCode::no_windows, "length " + std::to_string(len) + " is shorter than t_in + t_out = " +
                                           std::to_string(t_in + t_out));
  }
  return ds;
}

std::vector<std::size_t> sample_window_indices(const WindowedDataset& dataset, std::size_t count,
                                               std::uint64_t seed) {
  if (dataset.empty()) throw Error(ErrorCode::empty_dataset, "cannot sample from an empty dataset");
  if (count == 0) throw Error(ErrorCode::invalid_argument, "sample count must be at least 1");
  Rng rng(seed);
  std::vector<std::size_t> idx(count);
  for (auto& i : idx) i = uniform_index(rng, dataset.size());
  return idx;
}

std::vector<WindowPair> sample_windows(const WindowedDataset& dataset, std::size_t count,
                                       std::uint64_t seed) {
  std::vector<WindowPair> out;
  for (std::size_t i : sample_window_indices(dataset, count, seed)) out.push_back(dataset.pairs[i]);
  return out;
}

}  // namespace ddtime
