#include "priorloc/common/error.hpp"

namespace priorloc {

std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInternal: return "Internal";
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kCorrupt: return "Corrupt";
    case ErrorCode::kVersionMismatch: return "VersionMismatch";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kDegenerateInterval: return "DegenerateInterval";
    case ErrorCode::kBehindCamera: return "BehindCamera";
    case ErrorCode::kDegenerate: return "Degenerate";
    case ErrorCode::kNoAssociations: return "NoAssociations";
    case ErrorCode::kTooFewPoints: return "TooFewPoints";
    case ErrorCode::kNoCorrespondences: return "NoCorrespondences";
    case ErrorCode::kTrackingLost: return "TrackingLost";
    case ErrorCode::kDegenerateRay: return "DegenerateRay";
    case ErrorCode::kProviderFailure: return "ProviderFailure";
    case ErrorCode::kDimMismatch: return "DimMismatch";
    case ErrorCode::kSizeMismatch: return "SizeMismatch";
    case ErrorCode::kInsufficientParallax: return "InsufficientParallax";
    case ErrorCode::kCheiralityViolation: return "CheiralityViolation";
    case ErrorCode::kLargeReprojection: return "LargeReprojection";
    case ErrorCode::kReconstructionFailed: return "ReconstructionFailed";
    case ErrorCode::kRetrievalEmpty: return "RetrievalEmpty";
    case ErrorCode::kInsufficientMatches: return "InsufficientMatches";
    case ErrorCode::kRansacFailed: return "RansacFailed";
    case ErrorCode::kTooFewAssociations: return "TooFewAssociations";
    case ErrorCode::kDiverged: return "Diverged";
  }
  return "Unknown";
}

}  // namespace priorloc
