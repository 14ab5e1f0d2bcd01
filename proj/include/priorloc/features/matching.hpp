#pragma once

#include <utility>
#include <vector>

#include "priorloc/features/local_features.hpp"

namespace priorloc {

struct MatchConfig {
  /// Lowe ratio on cosine distance, applied in both directions.
  double ratio = 0.85;
  /// Matches with cosine distance at or above this are discarded.
  double max_distance = 2.0;
};

using Match = std::pair<std::size_t, std::size_t>;

/// Mutual nearest neighbors passing the ratio test on both sides, sorted by
/// the index into `a`. Throws DimMismatch when both sets are non-empty with
/// different descriptor sizes.
std::vector<Match> match_descriptors(const DescriptorMatrix& a, const DescriptorMatrix& b,
                                     const MatchConfig& cfg = {});

inline std::vector<Match> match_descriptors(const LocalFeatures& a, const LocalFeatures& b,
                                            const MatchConfig& cfg = {}) {
  return match_descriptors(a.descriptors, b.descriptors, cfg);
}

}  // namespace priorloc
