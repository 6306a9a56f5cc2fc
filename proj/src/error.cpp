#include "ddtime/error.hpp"

#include "ddtime/matrix.hpp"

namespace ddtime {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::missing_file: return "missing_file";
    case ErrorCode::ragged_rows: return "ragged_rows";
    case ErrorCode::non_numeric_cell: return "non_numeric_cell";
    case ErrorCode::non_finite_value: return "non_finite_value";
    case ErrorCode::empty_file: return "empty_file";
    case ErrorCode::empty_split: return "empty_split";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::no_windows: return "no_windows";
    case ErrorCode::empty_dataset: return "empty_dataset";
    case ErrorCode::shape_mismatch: return "shape_mismatch";
    case ErrorCode::length_mismatch: return "length_mismatch";
    case ErrorCode::empty_batch: return "empty_batch";
    case ErrorCode::zero_probability: return "zero_probability";
    case ErrorCode::degenerate_segment: return "degenerate_segment";
    case ErrorCode::span_too_large: return "span_too_large";
    case ErrorCode::divergence: return "divergence";
    case ErrorCode::bad_magic: return "bad_magic";
    case ErrorCode::version_mismatch: return "version_mismatch";
    case ErrorCode::truncated_file: return "truncated_file";
    case ErrorCode::checksum_failure: return "checksum_failure";
    case ErrorCode::io_error: return "io_error";
    case ErrorCode::config_error: return "config_error";
  }
  return "unknown";
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw Error(ErrorCode::shape_mismatch, "matrix data does not match its shape");
  }
}

Matrix Matrix::col_slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > cols_) {
    throw Error(ErrorCode::shape_mismatch, "column slice out of range");
  }
  Matrix out(rows_, end - begin);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = begin; c < end; ++c) out(r, c - begin) = (*this)(r, c);
  }
  return out;
}

}  // namespace ddtime
