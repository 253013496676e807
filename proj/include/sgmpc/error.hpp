#pragma once

#include <stdexcept>
#include <string>

namespace sgmpc {

enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kNonPSDCovariance,
  kWeightSumInvalid,
  kCholeskyFailure,
  kDegreeOverflow,
  kDegenerateMeasure,
  kToleranceNotMet,
  kStalled,
  kTooFewNodes,
  kNoExactRuleFound,
  kInfeasible,
  kNonConvergentSeries,
  kMissingModelConfig,
  kConfig,
};

const char* to_string(ErrorCode code);

/// Exception carrying a machine-readable error code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace sgmpc
