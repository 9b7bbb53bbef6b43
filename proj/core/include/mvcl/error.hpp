#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mvcl {

enum class ErrorCode {
  // geometry
  kMalformedHeader,
  kIndexOutOfRange,
  kTruncatedFile,
  kNonFiniteCoordinate,
  kEmptyMesh,
  kDegenerateExtent,
  kUnknownGeneratorKind,
  // renderer
  kViewIndexOutOfRange,
  kDegenerateCamera,
  kIoFailure,
  kUnsupportedMagic,
  kTruncatedPixelData,
  // tensor
  kShapeMismatch,
  kNonFiniteValue,
  kNonScalarLoss,
  // data
  kInconsistentViewCount,
  kEmptyDataset,
  kUnknownSplit,
  kDimensionMismatch,
  kMissingSidecar,
  // model
  kShapeManifestMismatch,
  kMissingFile,
  // losses
  kLabelOutOfRange,
  kAnchorWithoutPositive,
  kAnchorWithoutNegative,
  kUnknownLoss,
  // train
  kNonFiniteLoss,
  // eval
  kCorpusTooSmall,
  kEmptyCorpus,
  kNoRelevantItems,
  kCheckpointMismatch,
  // cli / config
  kInvalidConfig,
  kLocked,
};

std::string_view ErrorName(ErrorCode code);

/// Whether an error is a validation failure (bad input or config) as opposed
/// to a failure while running a well-formed request. The CLI maps these to
/// exit codes 1 and 2 respectively.
bool IsValidationError(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void Fail(ErrorCode code, const std::string& message);

}  // namespace mvcl
