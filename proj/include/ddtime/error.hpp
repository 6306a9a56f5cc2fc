#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ddtime {

enum class ErrorCode {
  missing_file,
  ragged_rows,
  non_numeric_cell,
  non_finite_value,
  empty_file,
  empty_split,
  invalid_argument,
  no_windows,
  empty_dataset,
  shape_mismatch,
  length_mismatch,
  empty_batch,
  zero_probability,
  degenerate_segment,
  span_too_large,
  divergence,
  bad_magic,
  version_mismatch,
  truncated_file,
  checksum_failure,
  io_error,
  config_error,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure in the library surfaces as this exception; `code()` lets
/// callers branch on the cause without parsing the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ddtime
