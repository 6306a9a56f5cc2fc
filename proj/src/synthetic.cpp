#include "ddtime/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "ddtime/error.hpp"

namespace ddtime {

SyntheticDataset::SyntheticDataset(std::size_t samples, std::size_t n_vars, std::size_t t_in,
                                   std::size_t t_out)
    : SyntheticDataset(samples, n_vars, t_in, t_out, std::vector<double>(samples * n_vars * (t_in + t_out))) {}

SyntheticDataset::SyntheticDataset(std::size_t samples, std::size_t n_vars, std::size_t t_in,
                                   std::size_t t_out, std::vector<double> data)
    : samples_(samples), n_vars_(n_vars), t_in_(t_in), t_out_(t_out), data_(std::move(data)) {
  if (samples == 0 || n_vars == 0 || t_in == 0 || t_out == 0) {
    throw Error(ErrorCode::invalid_argument, "synthetic dataset dimensions must be positive");
  }
  if (data_.size() != samples * n_vars * (t_in + t_out)) {
    throw Error(ErrorCode::shape_mismatch, "synthetic data size does not match its shape");
  }
}

std::span<const double> SyntheticDataset::sample(std::size_t i) const {
  return {data_.data() + offset(i, 0), n_vars_ * length()};
}

std::span<const double> SyntheticDataset::input_row(std::size_t i, std::size_t v) const {
  return {data_.data() + offset(i, v), t_in_};
}

std::span<const double> SyntheticDataset::target_row(std::size_t i, std::size_t v) const {
  return {data_.data() + offset(i, v) + t_in_, t_out_};
}

std::span<double> SyntheticDataset::target_row(std::size_t i, std::size_t v) {
  return {data_.data() + offset(i, v) + t_in_, t_out_};
}

Matrix SyntheticDataset::input(std::size_t i) const {
  Matrix m(n_vars_, t_in_);
  for (std::size_t v = 0; v < n_vars_; ++v) std::ranges::copy(input_row(i, v), m.row(v).begin());
  return m;
}

Matrix SyntheticDataset::target(std::size_t i) const {
  Matrix m(n_vars_, t_out_);
  for (std::size_t v = 0; v < n_vars_; ++v) std::ranges::copy(target_row(i, v), m.row(v).begin());
  return m;
}

std::vector<Row> SyntheticDataset::rows() const {
  std::vector<Row> out;
  out.reserve(samples_ * n_vars_);
  for (std::size_t i = 0; i < samples_; ++i) {
    for (std::size_t v = 0; v < n_vars_; ++v) out.push_back({input_row(i, v), target_row(i, v)});
  }
  return out;
}

std::vector<std::span<const double>> SyntheticDataset::sample_views() const {
  std::vector<std::span<const double>> out;
  for (std::size_t i = 0; i < samples_; ++i) out.push_back(sample(i));
  return out;
}

bool SyntheticDataset::all_finite() const {
  return std::ranges::all_of(data_, [](double x) { return std::isfinite(x); });
}

}  // namespace ddtime
