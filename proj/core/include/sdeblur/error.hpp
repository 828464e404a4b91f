#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sdeblur {

enum class ErrorCode {
  kAngleTooLarge,
  kNotARotation,
  kSingularProjection,
  kDegenerateHomography,
  kDimensionMismatch,
  kMissingSegment,
  kParseError,
  kInvariantViolation,
  kNumericalBreakdown,
  kInvalidArgument,
  kIoError,
};

std::string_view to_string(ErrorCode code);

/// Exception type thrown by every sdeblur routine. The code identifies the
/// failure class; what() carries a human-readable message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sdeblur
