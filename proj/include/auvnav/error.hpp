#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace auvnav {

enum class ErrorCode {
  kInvalidArgument,
  kInvalidRotation,
  kSingularLatitude,
  kNonMonotoneTime,
  kLengthMismatch,
  kDegenerateSample,
  kDegenerateGeometry,
  kAmbiguousAttitude,
  kInsufficientExcitation,
  kInsufficientBeams,
  kRankDeficient,
  kFilterDiverged,
  kSchemaMismatch,
  kStageDependency,
  kUnknownKey,
  kIo,
};

std::string_view to_string(ErrorCode code);

/// True for failures caused by the numbers themselves (divergence, degenerate
/// geometry, singular systems) rather than by malformed input.
bool is_numerical(ErrorCode code);

class NavError : public std::runtime_error {
 public:
  NavError(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace auvnav
