#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tfal {

enum class ErrorCode {
  kMalformedHeader,
  kTruncatedData,
  kUnsupportedDtype,
  kRejectedNonFinite,
  kIoFailure,
  kParseError,
  kMissingFile,
  kDuplicateId,
  kInvalidTargetSize,
  kShapeMismatch,
  kNoDefinedEntries,
  kEmptyDataset,
  kEmptyVideoList,
  kInvalidSchedule,
  kMissingPredictions,
  kNoEvaluatedClasses,
  kInvalidConfig,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedHeader: return "MalformedHeader";
    case ErrorCode::kTruncatedData: return "TruncatedData";
    case ErrorCode::kUnsupportedDtype: return "UnsupportedDtype";
    case ErrorCode::kRejectedNonFinite: return "RejectedNonFinite";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kMissingFile: return "MissingFile";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kInvalidTargetSize: return "InvalidTargetSize";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNoDefinedEntries: return "NoDefinedEntries";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kEmptyVideoList: return "EmptyVideoList";
    case ErrorCode::kInvalidSchedule: return "InvalidSchedule";
    case ErrorCode::kMissingPredictions: return "MissingPredictions";
    case ErrorCode::kNoEvaluatedClasses: return "NoEvaluatedClasses";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

// All library failures are reported through this exception type; callers
// branch on code() rather than on the message text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) throw Error(code, what);
}

}  // namespace tfal
