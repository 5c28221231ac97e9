#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace anthrofit {

enum class ErrorCode {
  kMagicMismatch,
  kVersionUnsupported,
  kTensorShapeMismatch,
  kInvariantViolation,
  kDimensionMismatch,
  kNonFiniteInput,
  kUnknownLandmark,
  kEmptyIntersection,
  kDegeneratePlane,
  kTooFewSamples,
  kInvalidConfig,
  kDivergenceDetected,
  kNoConvergence,
  kGenderMismatch,
  kUnknownRegressor,
  kNonFiniteLoss,
  kTooFewKeypoints,
  kIndexOutOfRange,
  kFrameIdMismatch,
  kKeypointCountMismatch,
  kTopologyMismatch,
  kNoPresentFrames,
  kIoError,
  kParseError,
};

std::string_view errorName(ErrorCode code);

/// Domain error raised by every module. The code identifies the failure class;
/// the message carries the details.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(errorName(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept {
    return code_;
  }

 private:
  ErrorCode code_;
};

#define ANTHROFIT_THROW_IF(cond, code, msg)    \
  do {                                         \
    if (cond) {                                \
      throw ::anthrofit::Error((code), (msg)); \
    }                                          \
  } while (0)

} // namespace anthrofit
