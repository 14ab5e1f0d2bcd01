#include "priorloc/localizer/frame_tracking.hpp"

#include <cmath>
#include <limits>

#include "priorloc/common/error.hpp"

namespace priorloc {

void FrameTrackConfig::validate() const {
  if (min_tracked < 4 || !(flow_radius > 0.0) || !(flow_desc_gate > 0.0)) {
    throw Error(ErrorCode::kConfig, "frame tracking: invalid configuration");
  }
  lk.validate();
  pnp.validate();
}

FrameTrackResult frame_track(const TrackState& state, const LocFrame& frame,
                             const VisualMap& map, const Intrinsics& K,
                             const FrameTrackConfig& cfg) {
  cfg.validate();
  if (state.mode != TrackMode::kTracking) {
    throw Error(ErrorCode::kInternal, "frame tracking requires tracking mode");
  }
  FrameTrackResult out;
  std::vector<std::size_t> sources;  // last-frame keypoints carrying a point
  for (std::size_t i = 0; i < state.last_points.size(); ++i) {
    if (state.last_points[i] != kNoPoint && map.has_point(static_cast<PointId>(state.last_points[i]))) {
      sources.push_back(i);
    }
  }
  const LocalFeatures& cur = frame.features.local;
  const auto add = [&](std::size_t src, const Vec2& px) {
    const auto id = static_cast<PointId>(state.last_points[src]);
    out.correspondences.push_back({px, map.point(id).position});
    out.points.push_back(id);
  };

  if (frame.image && !state.last_image.empty()) {
    out.used_lk = true;
    std::vector<Vec2> pts;
    for (std::size_t i : sources) pts.push_back(state.last_features.keypoints[i]);
    const std::vector<LkTrack> tracks = lk_track(state.last_image, *frame.image, pts, cfg.lk);
    for (std::size_t k = 0; k < sources.size(); ++k) {
      if (tracks[k].ok) add(sources[k], tracks[k].point);
    }
  } else if (cur.size() > 0 && !sources.empty()) {
    if (cur.dim() != state.last_features.dim()) {
      throw Error(ErrorCode::kDimMismatch, "frame tracking: descriptor sizes differ");
    }
    // Each source claims its best current keypoint; a keypoint claimed twice
    // goes to the smaller distance.
    const double r2 = cfg.flow_radius * cfg.flow_radius;
    std::vector<double> claim_dist(cur.size(), std::numeric_limits<double>::infinity());
    std::vector<std::size_t> claim_src(cur.size(), 0);
    for (std::size_t i : sources) {
      const Vec2& x = state.last_features.keypoints[i];
      const auto d_last = state.last_features.descriptors.row(static_cast<Eigen::Index>(i));
      double best = cfg.flow_desc_gate;
      std::size_t best_kp = cur.size();
      for (std::size_t j = 0; j < cur.size(); ++j) {
        if ((cur.keypoints[j] - x).squaredNorm() > r2) continue;
        const double d = 1.0 - d_last.dot(cur.descriptors.row(static_cast<Eigen::Index>(j)));
        if (d < best) {
          best = d;
          best_kp = j;
        }
      }
      if (best_kp == cur.size()) continue;
      if (best < claim_dist[best_kp]) {
        claim_dist[best_kp] = best;
        claim_src[best_kp] = i;
      }
    }
    for (std::size_t j = 0; j < cur.size(); ++j) {
      if (std::isfinite(claim_dist[j])) add(claim_src[j], cur.keypoints[j]);
    }
  }

  out.survivors = out.correspondences.size();
  if (out.survivors < cfg.min_tracked) {
    throw Error(ErrorCode::kTrackingLost, "frame tracking: " + std::to_string(out.survivors) +
                                              " survivors, need " +
                                              std::to_string(cfg.min_tracked));
  }
  PnpConfig pnp = cfg.pnp;
  pnp.min_inliers = static_cast<int>(cfg.min_tracked);
  try {
    const PnpResult pr = pnp_ransac(out.correspondences, K, pnp);
    out.Tbar = pr.pose;
    out.inlier = pr.inlier;
  } catch (const Error& e) {
    throw Error(ErrorCode::kTrackingLost, std::string("frame tracking: ") + e.what());
  }
  return out;
}

}  // namespace priorloc
