#include "qsadn/error.hpp"

namespace qsadn {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kFileNotFound: return "FileNotFound";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kMalformedHeader: return "MalformedHeader";
    case ErrorCode::kTruncatedData: return "TruncatedData";
    case ErrorCode::kOutOfBounds: return "OutOfBounds";
    case ErrorCode::kPatchTooLarge: return "PatchTooLarge";
    case ErrorCode::kSizeMismatch: return "SizeMismatch";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kDegenerateRange: return "DegenerateRange";
    case ErrorCode::kEmptyHistogram: return "EmptyHistogram";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kEmptyTarget: return "EmptyTarget";
    case ErrorCode::kEmptySet: return "EmptySet";
    case ErrorCode::kZeroVariance: return "ZeroVariance";
    case ErrorCode::kNonpositiveSigma: return "NonpositiveSigma";
    case ErrorCode::kNonpositiveMax: return "NonpositiveMax";
    case ErrorCode::kNonpositiveRange: return "NonpositiveRange";
    case ErrorCode::kOutOfDomain: return "OutOfDomain";
    case ErrorCode::kWeightOutOfRange: return "WeightOutOfRange";
    case ErrorCode::kAllZeroWeights: return "AllZeroWeights";
    case ErrorCode::kDivergence: return "Divergence";
    case ErrorCode::kRankDeficient: return "RankDeficient";
    case ErrorCode::kImageTooSmall: return "ImageTooSmall";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kMalformedManifest: return "MalformedManifest";
    case ErrorCode::kConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace qsadn
