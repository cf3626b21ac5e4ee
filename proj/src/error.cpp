#include "auvnav/error.hpp"

namespace auvnav {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kInvalidRotation: return "invalid-rotation";
    case ErrorCode::kSingularLatitude: return "singular-latitude";
    case ErrorCode::kNonMonotoneTime: return "non-monotone-time";
    case ErrorCode::kLengthMismatch: return "length-mismatch";
    case ErrorCode::kDegenerateSample: return "degenerate-sample";
    case ErrorCode::kDegenerateGeometry: return "degenerate-geometry";
    case ErrorCode::kAmbiguousAttitude: return "ambiguous-attitude";
    case ErrorCode::kInsufficientExcitation: return "insufficient-excitation";
    case ErrorCode::kInsufficientBeams: return "insufficient-beams";
    case ErrorCode::kRankDeficient: return "rank-deficient";
    case ErrorCode::kFilterDiverged: return "filter-diverged";
    case ErrorCode::kSchemaMismatch: return "schema-mismatch";
    case ErrorCode::kStageDependency: return "stage-dependency";
    case ErrorCode::kUnknownKey: return "unknown-key";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

bool is_numerical(ErrorCode code) {
  switch (code) {
    case ErrorCode::kSingularLatitude:
    case ErrorCode::kDegenerateGeometry:
    case ErrorCode::kAmbiguousAttitude:
    case ErrorCode::kInsufficientExcitation:
    case ErrorCode::kRankDeficient:
    case ErrorCode::kFilterDiverged:
      return true;
    default:
      return false;
  }
}

}  // namespace auvnav
