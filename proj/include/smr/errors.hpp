#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace smr {

enum class ErrorCode {
  kDegenerateConfiguration,
  kDegenerateRay,
  kZeroIntersectionAngle,
  kParallelRays,
  kInvalidConfig,
  kEmptyFrame,
  kInsufficientHistory,
  kZeroBaseline,
  kOutOfOrderFrame,
  kNoValidPairs,
  kOutOfRangeTheta,
  kResidualTooLarge,
  kScenarioMismatch,
  kMalformedInput,
  kInvariantViolation,
};

std::string_view to_string(ErrorCode code);

// All library failures are reported through this type; `code()` tells the
// caller which contract was violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::kDegenerateRay: return "DegenerateRay";
    case ErrorCode::kZeroIntersectionAngle: return "ZeroIntersectionAngle";
    case ErrorCode::kParallelRays: return "ParallelRays";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kEmptyFrame: return "EmptyFrame";
    case ErrorCode::kInsufficientHistory: return "InsufficientHistory";
    case ErrorCode::kZeroBaseline: return "ZeroBaseline";
    case ErrorCode::kOutOfOrderFrame: return "OutOfOrderFrame";
    case ErrorCode::kNoValidPairs: return "NoValidPairs";
    case ErrorCode::kOutOfRangeTheta: return "OutOfRangeTheta";
    case ErrorCode::kResidualTooLarge: return "ResidualTooLarge";
    case ErrorCode::kScenarioMismatch: return "ScenarioMismatch";
    case ErrorCode::kMalformedInput: return "MalformedInput";
    case ErrorCode::kInvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

}  // namespace smr
