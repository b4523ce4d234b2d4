#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qsadn {

/// Failure categories shared by every module. The CLI maps these onto exit codes.
enum class ErrorCode {
  kFileNotFound,
  kIoError,
  kMalformedHeader,
  kTruncatedData,
  kOutOfBounds,
  kPatchTooLarge,
  kSizeMismatch,
  kDimensionMismatch,
  kDegenerateRange,
  kEmptyHistogram,
  kEmptyInput,
  kEmptyTarget,
  kEmptySet,
  kZeroVariance,
  kNonpositiveSigma,
  kNonpositiveMax,
  kNonpositiveRange,
  kOutOfDomain,
  kWeightOutOfRange,
  kAllZeroWeights,
  kDivergence,
  kRankDeficient,
  kImageTooSmall,
  kInvalidArgument,
  kMalformedManifest,
  kConfigError,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace qsadn
