#pragma once

#include <string>

#include "priorloc/localizer/frame_tracking.hpp"
#include "priorloc/localizer/pose_optimizer.hpp"
#include "priorloc/localizer/relocalization.hpp"

namespace priorloc {

struct LocalizerConfig {
  RelocConfig reloc;
  FrameTrackConfig track;
  MapMatchConfig match;
  PoseOptConfig optimize;
  double match_radius = 8.0;   // px
  double reload_radius = 2.0;  // px
  int w_min = 15;              // co-visibility weight for the active cluster
  /// On TrackingLost, relocalize the same frame instead of waiting for the
  /// next one.
  bool relocalize_on_loss = true;

  void validate() const;
};

/// Per-stage wall time of one step (ms).
struct StageTimings {
  double relocalization = 0.0;
  double tracking = 0.0;
  double map_matching = 0.0;
  double optimization = 0.0;
  double reload = 0.0;
  double total = 0.0;
};

struct LocResult {
  bool ok = false;
  Pose pose;
  std::size_t inliers = 0;  // associations kept by pose optimization
  std::size_t tracked = 0;  // associations carried to the next frame
  TrackMode mode = TrackMode::kRelocalizing;  // mode that produced the pose
  bool tracking_lost = false;
  std::optional<ErrorCode> error;  // last failure of this step
  StageTimings timing;
};

/// One localization step against the frozen map. Relocalizing mode runs
/// relocalize; tracking mode runs frame_track. Either way the pose is then
/// refined: the active cluster and local map are refreshed, the local map is
/// matched at `match_radius`, the pose is optimized against the coarse pose,
/// outlier associations are dropped, working descriptors of inliers are
/// updated, and a reload pass at `reload_radius` adds associations for the
/// next frame. TrackingLost flips the state to Relocalizing.
LocResult localize_step(TrackState& state, const LocFrame& frame, const VisualMap& map,
                        const Intrinsics& K, const LocalizerConfig& cfg = {});

}  // namespace priorloc
