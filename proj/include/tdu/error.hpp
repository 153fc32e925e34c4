#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tdu {

enum class ErrorCode {
  invalid_argument,
  invalid_size,
  non_finite_input,
  dimension_mismatch,
  insufficient_data,
  data_integrity,
  bad_magic,
  bad_version,
  truncated_payload,
  non_monotone_keys,
  divergence,
  ingestion,
  io,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::invalid_size: return "invalid-size";
    case ErrorCode::non_finite_input: return "non-finite-input";
    case ErrorCode::dimension_mismatch: return "dimension-mismatch";
    case ErrorCode::insufficient_data: return "insufficient-data";
    case ErrorCode::data_integrity: return "data-integrity";
    case ErrorCode::bad_magic: return "bad-magic";
    case ErrorCode::bad_version: return "bad-version";
    case ErrorCode::truncated_payload: return "truncated-payload";
    case ErrorCode::non_monotone_keys: return "non-monotone-keys";
    case ErrorCode::divergence: return "divergence";
    case ErrorCode::ingestion: return "ingestion";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

/// Every failure raised by the library carries a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace tdu
