#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hoptrace {

enum class ErrorCode {
  kInvalidArgument,
  kParseError,
  kIoError,
  kDuplicateId,
  kMissingEmbedding,
  kInvalidEmbedding,
  kUnknownImageId,
  kEmptyStoreForModality,
  kProviderUnavailable,
  kDimensionMismatch,
  kBudgetExhausted,
  kTransportError,
  kScriptExhausted,
  kDanglingEvidence,
  kJudgeParseFailure,
  kEmptyGoldGraph,
  kRewriteValidationFailure,
  kAugmentFailure,
  kMissingCompanionTrace,
};

std::string_view error_code_name(ErrorCode code);

/// Every failure raised by the library carries a machine-readable code so
/// callers (the CLI, per-sample quarantine) can branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hoptrace
