#pragma once

#include <span>
#include <vector>

#include "priorloc/features/matching.hpp"
#include "priorloc/mapper/gaba.hpp"
#include "priorloc/mapper/keyframes.hpp"
#include "priorloc/mapper/triangulation.hpp"

namespace priorloc {

struct MappingFrame {
  std::int64_t frame_index = 0;
  double timestamp = 0.0;
  Pose prior;  // camera-to-world from registration
  Extraction extraction;
};

struct ReconstructionConfig {
  KeyframeSamplingConfig sampling;
  MatchConfig matching;
  /// Looser than the standalone default: new points are triangulated from
  /// prior-initialized poses and outliers are detached after GABA.
  TriangulationConfig triangulation{.max_reprojection = 10.0};
  GabaConfig gaba;
  /// Reprojection gate when adding a new view to an existing point, px.
  double extend_reprojection = 4.0;
  bool local_gaba = true;
  int local_window = 8;       // keyframes
  int global_every = 20;      // keyframes, 0 disables the periodic pass
  /// Structure factor in the local and periodic passes. Off by default: ray
  /// associations from a map that has not settled pull points onto the
  /// wrong surfaces, so only the final pass uses it.
  bool incremental_structure = false;

  void validate() const;
};

struct ReconstructionReport {
  std::size_t keyframes = 0;
  std::size_t matched_pairs = 0;
  std::size_t tracks = 0;
  std::size_t conflicting_tracks = 0;  // two keypoints of one keyframe
  std::size_t triangulated = 0;
  std::size_t rejected_parallax = 0;
  std::size_t rejected_cheirality = 0;
  std::size_t rejected_reprojection = 0;
  std::size_t extended_observations = 0;
  GabaReport final_gaba;
};

/// Keyframes sampled from the priors and initialized at them, pairwise
/// matches chained into tracks, incremental triangulation with local GABA,
/// periodic and final global GABA. `voxels` may be null when the structure
/// factor is disabled. Throws ReconstructionFailed with fewer than two
/// keyframes or when no point survives.
VisualMap reconstruct(std::span<const MappingFrame> frames, const Intrinsics& K,
                      const VoxelMap* voxels, const ReconstructionConfig& cfg,
                      ReconstructionReport* report = nullptr);

}  // namespace priorloc
