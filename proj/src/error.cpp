#include "sgmpc/error.hpp"

namespace sgmpc {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNonPSDCovariance: return "NonPSDCovariance";
    case ErrorCode::kWeightSumInvalid: return "WeightSumInvalid";
    case ErrorCode::kCholeskyFailure: return "CholeskyFailure";
    case ErrorCode::kDegreeOverflow: return "DegreeOverflow";
    case ErrorCode::kDegenerateMeasure: return "DegenerateMeasure";
    case ErrorCode::kToleranceNotMet: return "ToleranceNotMet";
    case ErrorCode::kStalled: return "Stalled";
    case ErrorCode::kTooFewNodes: return "TooFewNodes";
    case ErrorCode::kNoExactRuleFound: return "NoExactRuleFound";
    case ErrorCode::kInfeasible: return "Infeasible";
    case ErrorCode::kNonConvergentSeries: return "NonConvergentSeries";
    case ErrorCode::kMissingModelConfig: return "MissingModelConfig";
    case ErrorCode::kConfig: return "ConfigError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

}  // namespace sgmpc
