#include "segkit/error.hpp"

namespace segkit {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kMissingColumn: return "MissingColumn";
    case ErrorCode::kTypeOverflow: return "TypeOverflow";
    case ErrorCode::kNonPositiveCpi: return "NonPositiveCpi";
    case ErrorCode::kEmptyAfterDeletion: return "EmptyAfterDeletion";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kRankDeficient: return "RankDeficient";
    case ErrorCode::kTooFewRows: return "TooFewRows";
    case ErrorCode::kPerfectSeparation: return "PerfectSeparation";
    case ErrorCode::kNoVariationInY: return "NoVariationInY";
    case ErrorCode::kMaxIterations: return "MaxIterations";
    case ErrorCode::kZeroGenderTotal: return "ZeroGenderTotal";
    case ErrorCode::kGroupTooSmall: return "GroupTooSmall";
    case ErrorCode::kUnknownBaseTime: return "UnknownBaseTime";
    case ErrorCode::kNoControls: return "NoControls";
    case ErrorCode::kEmptySupport: return "EmptySupport";
    case ErrorCode::kColumnMismatch: return "ColumnMismatch";
    case ErrorCode::kStratumTooSmall: return "StratumTooSmall";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kConfigInvalid: return "ConfigInvalid";
    case ErrorCode::kAnalysisFailed: return "AnalysisFailed";
  }
  return "Unknown";
}

}  // namespace segkit
