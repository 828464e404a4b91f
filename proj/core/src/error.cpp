#include "sdeblur/error.hpp"

namespace sdeblur {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kAngleTooLarge: return "AngleTooLarge";
    case ErrorCode::kNotARotation: return "NotARotation";
    case ErrorCode::kSingularProjection: return "SingularProjection";
    case ErrorCode::kDegenerateHomography: return "DegenerateHomography";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kMissingSegment: return "MissingSegment";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kInvariantViolation: return "InvariantViolation";
    case ErrorCode::kNumericalBreakdown: return "NumericalBreakdown";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code) {}

}  // namespace sdeblur
