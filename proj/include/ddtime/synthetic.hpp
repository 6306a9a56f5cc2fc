#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ddtime/matrix.hpp"
#include "ddtime/models.hpp"

namespace ddtime {

/// Learnable tensor [S x N x (t_in + t_out)]. Along time, the first t_in
/// steps of each variable are the input window and the rest the target.
class SyntheticDataset {
 public:
  SyntheticDataset() = default;
  SyntheticDataset(std::size_t samples, std::size_t n_vars, std::size_t t_in, std::size_t t_out);
  SyntheticDataset(std::size_t samples, std::size_t n_vars, std::size_t t_in, std::size_t t_out,
                   std::vector<double> data);

  std::size_t samples() const noexcept { return samples_; }
  std::size_t n_vars() const noexcept { return n_vars_; }
  std::size_t t_in() const noexcept { return t_in_; }
  std::size_t t_out() const noexcept { return t_out_; }
  std::size_t length() const noexcept { return t_in_ + t_out_; }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  /// Entire sample i, flattened [N x T].
  std::span<const double> sample(std::size_t i) const;
  std::span<const double> input_row(std::size_t i, std::size_t v) const;
  std::span<const double> target_row(std::size_t i, std::size_t v) const;
  std::span<double> target_row(std::size_t i, std::size_t v);

  Matrix input(std::size_t i) const;
  Matrix target(std::size_t i) const;

  /// All S*N regression rows, sample-major.
  std::vector<Row> rows() const;
  std::vector<std::span<const double>> sample_views() const;

  bool all_finite() const;
  bool operator==(const SyntheticDataset&) const = default;

 private:
  std::size_t offset(std::size_t i, std::size_t v) const { return (i * n_vars_ + v) * length(); }

  std::size_t samples_ = 0;
  std::size_t n_vars_ = 0;
  std::size_t t_in_ = 0;
  std::size_t t_out_ = 0;
  std::vector<double> data_;
};

}  // namespace ddtime
