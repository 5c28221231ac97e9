#include "anthrofit/error.h"

namespace anthrofit {

std::string_view errorName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMagicMismatch:
      return "MagicMismatch";
    case ErrorCode::kVersionUnsupported:
      return "VersionUnsupported";
    case ErrorCode::kTensorShapeMismatch:
      return "TensorShapeMismatch";
    case ErrorCode::kInvariantViolation:
      return "InvariantViolation";
    case ErrorCode::kDimensionMismatch:
      return "DimensionMismatch";
    case ErrorCode::kNonFiniteInput:
      return "NonFiniteInput";
    case ErrorCode::kUnknownLandmark:
      return "UnknownLandmark";
    case ErrorCode::kEmptyIntersection:
      return "EmptyIntersection";
    case ErrorCode::kDegeneratePlane:
      return "DegeneratePlane";
    case ErrorCode::kTooFewSamples:
      return "TooFewSamples";
    case ErrorCode::kInvalidConfig:
      return "InvalidConfig";
    case ErrorCode::kDivergenceDetected:
      return "DivergenceDetected";
    case ErrorCode::kNoConvergence:
      return "NoConvergence";
    case ErrorCode::kGenderMismatch:
      return "GenderMismatch";
    case ErrorCode::kUnknownRegressor:
      return "UnknownRegressor";
    case ErrorCode::kNonFiniteLoss:
      return "NonFiniteLoss";
    case ErrorCode::kTooFewKeypoints:
      return "TooFewKeypoints";
    case ErrorCode::kIndexOutOfRange:
      return "IndexOutOfRange";
    case ErrorCode::kFrameIdMismatch:
      return "FrameIdMismatch";
    case ErrorCode::kKeypointCountMismatch:
      return "KeypointCountMismatch";
    case ErrorCode::kTopologyMismatch:
      return "TopologyMismatch";
    case ErrorCode::kNoPresentFrames:
      return "NoPresentFrames";
    case ErrorCode::kIoError:
      return "IoError";
    case ErrorCode::kParseError:
      return "ParseError";
  }
  return "Unknown";
}

} // namespace anthrofit
