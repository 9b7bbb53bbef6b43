#include "mvcl/error.hpp"

namespace mvcl {

std::string_view ErrorName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedHeader: return "MalformedHeader";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kTruncatedFile: return "TruncatedFile";
    case ErrorCode::kNonFiniteCoordinate: return "NonFiniteCoordinate";
    case ErrorCode::kEmptyMesh: return "EmptyMesh";
    case ErrorCode::kDegenerateExtent: return "DegenerateExtent";
    case ErrorCode::kUnknownGeneratorKind: return "UnknownGeneratorKind";
    case ErrorCode::kViewIndexOutOfRange: return "ViewIndexOutOfRange";
    case ErrorCode::kDegenerateCamera: return "DegenerateCamera";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kUnsupportedMagic: return "UnsupportedMagic";
    case ErrorCode::kTruncatedPixelData: return "TruncatedPixelData";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonFiniteValue: return "NonFiniteValue";
    case ErrorCode::kNonScalarLoss: return "NonScalarLoss";
    case ErrorCode::kInconsistentViewCount: return "InconsistentViewCount";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kUnknownSplit: return "UnknownSplit";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kMissingSidecar: return "MissingSidecar";
    case ErrorCode::kShapeManifestMismatch: return "ShapeManifestMismatch";
    case ErrorCode::kMissingFile: return "MissingFile";
    case ErrorCode::kLabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::kAnchorWithoutPositive: return "AnchorWithoutPositive";
    case ErrorCode::kAnchorWithoutNegative: return "AnchorWithoutNegative";
    case ErrorCode::kUnknownLoss: return "UnknownLoss";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kCorpusTooSmall: return "CorpusTooSmall";
    case ErrorCode::kEmptyCorpus: return "EmptyCorpus";
    case ErrorCode::kNoRelevantItems: return "NoRelevantItems";
    case ErrorCode::kCheckpointMismatch: return "CheckpointMismatch";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kLocked: return "Locked";
  }
  return "Unknown";
}

bool IsValidationError(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIoFailure:
    case ErrorCode::kNonFiniteValue:
    case ErrorCode::kNonFiniteLoss:
      return false;
    default:
      return true;
  }
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(ErrorName(code)) + ": " + message), code_(code) {}

void Fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace mvcl
