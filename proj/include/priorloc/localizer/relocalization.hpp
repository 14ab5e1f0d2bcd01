#pragma once

#include <vector>

#include "priorloc/features/matching.hpp"
#include "priorloc/localizer/local_map_matching.hpp"
#include "priorloc/localizer/pnp.hpp"

namespace priorloc {

struct RelocConfig {
  std::size_t k = 5;            // retrieved keyframes
  double min_similarity = 0.1;  // cosine, retrieval hits below are dropped
  int w_min = 15;               // co-visibility weight for cluster expansion
  MatchConfig matching;
  std::size_t min_matches = 6;
  int min_inliers = 12;
  PnpConfig pnp;

  void validate() const;
};

struct RelocResult {
  Pose pose;
  std::vector<Association> associations;  // PnP inliers, sorted by keypoint
  KeyframeId keyframe = 0;                // retrieval hit seeding the cluster
  std::vector<KeyframeId> cluster;
  std::size_t candidates = 0;  // 2D-3D matches fed to PnP
};

/// Global retrieval, co-visibility cluster expansion, descriptor matching of
/// the query against the cluster's map points and PnP-RANSAC. Every cluster
/// is tried and the one with the most inliers wins (ties by retrieval rank).
/// Throws RetrievalEmpty, InsufficientMatches (no cluster reached
/// min_matches) or RansacFailed.
RelocResult relocalize(const LocalFeatures& feats, const GlobalDescriptor& gdesc,
                       const VisualMap& map, const Intrinsics& K, const RelocConfig& cfg = {});

/// Keyframe `seed` plus its co-visible neighbors with weight >= w_min,
/// ascending.
std::vector<KeyframeId> covisibility_cluster(const VisualMap& map, KeyframeId seed, int w_min);

/// Map points observed by any keyframe of the cluster, ascending.
std::vector<PointId> cluster_points(const VisualMap& map, const std::vector<KeyframeId>& cluster);

}  // namespace priorloc
