#pragma once

#include <vector>

#include "priorloc/features/optical_flow.hpp"
#include "priorloc/localizer/pnp.hpp"
#include "priorloc/localizer/track_state.hpp"

namespace priorloc {

struct FrameTrackConfig {
  std::size_t min_tracked = 15;
  LkConfig lk;
  /// Without images, last-frame keypoints are carried to the current
  /// keypoint with the smallest descriptor distance below `flow_desc_gate`
  /// within `flow_radius` px.
  double flow_radius = 100.0;
  double flow_desc_gate = 0.7;
  PnpConfig pnp;

  void validate() const;
};

struct FrameTrackResult {
  Pose Tbar;
  std::vector<Correspondence> correspondences;  // tracked pixel and map point
  std::vector<PointId> points;                  // per correspondence
  std::vector<bool> inlier;                     // per correspondence
  std::size_t survivors = 0;
  bool used_lk = false;
};

/// Carries the map-point observations of the last frame into the current
/// frame (LK on images, descriptor-gated flow otherwise) and recovers the
/// coarse pose with PnP-RANSAC. Throws TrackingLost when fewer than
/// `min_tracked` observations survive or PnP fails.
FrameTrackResult frame_track(const TrackState& state, const LocFrame& frame,
                             const VisualMap& map, const Intrinsics& K,
                             const FrameTrackConfig& cfg = {});

}  // namespace priorloc
