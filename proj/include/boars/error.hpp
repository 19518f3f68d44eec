#pragma once

#include <stdexcept>
#include <string>

namespace boars {

enum class ErrorCode {
  InvalidArgument,
  Io,
  Format,
  DimensionMismatch,
  NonFinite,
  DegenerateSpectrum,
  OutOfRange,
  InvalidState,
  Factorization,
  NotFound,
  Conflict,
  Aborted,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::Io: return "io";
    case ErrorCode::Format: return "format";
    case ErrorCode::DimensionMismatch: return "dimension_mismatch";
    case ErrorCode::NonFinite: return "non_finite";
    case ErrorCode::DegenerateSpectrum: return "degenerate_spectrum";
    case ErrorCode::OutOfRange: return "out_of_range";
    case ErrorCode::InvalidState: return "invalid_state";
    case ErrorCode::Factorization: return "factorization";
    case ErrorCode::NotFound: return "not_found";
    case ErrorCode::Conflict: return "conflict";
    case ErrorCode::Aborted: return "aborted";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace boars
