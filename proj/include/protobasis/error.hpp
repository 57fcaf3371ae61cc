#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace protobasis {

enum class ErrorCode {
  kNonFiniteEntry,
  kShapeMismatch,
  kNonMonotoneGrid,
  kEmptyGrid,
  kInvalidArgument,
  kMissingTruth,
  kMissingNoiseScale,
  kDimensionMismatch,
  kLengthMismatch,
  kDegenerateDictionary,
  kEpsilonTooSmall,
  kNonConvergence,
  kNotConverged,
  kTargetKUnreachable,
  kIterationLimit,
  kUnknownMethod,
  kParse,
  kIo,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNonFiniteEntry: return "NonFiniteEntry";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonMonotoneGrid: return "NonMonotoneGrid";
    case ErrorCode::kEmptyGrid: return "EmptyGrid";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kMissingTruth: return "MissingTruth";
    case ErrorCode::kMissingNoiseScale: return "MissingNoiseScale";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kDegenerateDictionary: return "DegenerateDictionary";
    case ErrorCode::kEpsilonTooSmall: return "EpsilonTooSmall";
    case ErrorCode::kNonConvergence: return "NonConvergence";
    case ErrorCode::kNotConverged: return "NotConverged";
    case ErrorCode::kTargetKUnreachable: return "TargetKUnreachable";
    case ErrorCode::kIterationLimit: return "IterationLimit";
    case ErrorCode::kUnknownMethod: return "UnknownMethod";
    case ErrorCode::kParse: return "Parse";
    case ErrorCode::kIo: return "IoError";
  }
  return "Unknown";
}

/// Exception carrying a machine-readable code. `index` names the offending
/// entry for validation errors; `payload` carries an integer detail such as
/// the archetype count for NonConvergence or the nearest achievable count
/// for TargetKUnreachable.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<std::size_t> index = std::nullopt,
        std::optional<long> payload = std::nullopt)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        index_(index),
        payload_(payload) {}

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> index() const noexcept { return index_; }
  std::optional<long> payload() const noexcept { return payload_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> index_;
  std::optional<long> payload_;
};

// Process exit codes used by the command-line tool.
inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNonConvergence:
    case ErrorCode::kNotConverged:
    case ErrorCode::kTargetKUnreachable:
    case ErrorCode::kIterationLimit:
    case ErrorCode::kEpsilonTooSmall:
      return 3;
    case ErrorCode::kIo:
      return 4;
    default:
      return 2;
  }
}

}  // namespace protobasis
