#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace segkit {

enum class ErrorCode {
  kIoFailure,
  kMissingColumn,
  kTypeOverflow,
  kNonPositiveCpi,
  kEmptyAfterDeletion,
  kInvalidArgument,
  kRankDeficient,
  kTooFewRows,
  kPerfectSeparation,
  kNoVariationInY,
  kMaxIterations,
  kZeroGenderTotal,
  kGroupTooSmall,
  kUnknownBaseTime,
  kNoControls,
  kEmptySupport,
  kColumnMismatch,
  kStratumTooSmall,
  kEmptyInput,
  kInvalidSpec,
  kConfigInvalid,
  kAnalysisFailed,
};

std::string_view to_string(ErrorCode code) noexcept;

// All library failures are reported through this type; `code()` is stable
// and is what the CLI prints in its machine-readable error report.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace segkit
