#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace priorloc {

// Stable error categories. The numeric values double as CLI exit codes, so
// never renumber an existing entry.
enum class ErrorCode : int {
  kInternal = 1,
  kConfig = 2,
  kIo = 3,
  kCorrupt = 4,
  kVersionMismatch = 5,
  // geometry
  kOutOfRange = 10,
  kDegenerateInterval = 11,
  kBehindCamera = 12,
  kDegenerate = 13,
  kNoAssociations = 14,
  // registration
  kTooFewPoints = 20,
  kNoCorrespondences = 21,
  kTrackingLost = 22,
  // voxel map
  kDegenerateRay = 30,
  // features
  kProviderFailure = 40,
  kDimMismatch = 41,
  kSizeMismatch = 42,
  // mapper
  kInsufficientParallax = 50,
  kCheiralityViolation = 51,
  kLargeReprojection = 52,
  kReconstructionFailed = 53,
  // localizer
  kRetrievalEmpty = 60,
  kInsufficientMatches = 61,
  kRansacFailed = 62,
  kTooFewAssociations = 63,
  kDiverged = 64,
};

std::string_view error_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace priorloc
