#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace screenwise {

enum class ErrorCode {
  kUnknownFeature,
  kNonNumericValue,
  kSchemaMismatch,
  kInvalidArgument,
  kMissingRequiredOutcome,
  kDegenerateInput,
  kEmptyTrainingSet,
  kPolicyInfeasible,
  kWrongTest,
  kSessionFinal,
  kMissingHeader,
  kUnreadableFile,
  kConfig,
  kFingerprintMismatch,
  kNotFound,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownFeature: return "UnknownFeature";
    case ErrorCode::kNonNumericValue: return "NonNumericValue";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kMissingRequiredOutcome: return "MissingRequiredOutcome";
    case ErrorCode::kDegenerateInput: return "DegenerateInput";
    case ErrorCode::kEmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::kPolicyInfeasible: return "PolicyInfeasible";
    case ErrorCode::kWrongTest: return "WrongTest";
    case ErrorCode::kSessionFinal: return "SessionFinal";
    case ErrorCode::kMissingHeader: return "MissingHeader";
    case ErrorCode::kUnreadableFile: return "UnreadableFile";
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kFingerprintMismatch: return "FingerprintMismatch";
    case ErrorCode::kNotFound: return "NotFound";
  }
  return "Unknown";
}

/// Single exception type for every user-facing failure; the code drives CLI
/// exit codes and HTTP status mapping.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace screenwise
