#include "priorloc/localizer/localizer.hpp"

#include <chrono>
#include <map>

#include "priorloc/common/error.hpp"

namespace priorloc {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

bool recoverable(ErrorCode code) {
  switch (code) {
    case ErrorCode::kTrackingLost:
    case ErrorCode::kRetrievalEmpty:
    case ErrorCode::kInsufficientMatches:
    case ErrorCode::kRansacFailed:
    case ErrorCode::kTooFewPoints:
    case ErrorCode::kTooFewAssociations:
    case ErrorCode::kDiverged:
      return true;
    default:
      return false;
  }
}

/// Keyframe observing the most seed points (ties by id).
std::optional<KeyframeId> best_keyframe(const VisualMap& map, const std::vector<PointId>& seeds) {
  std::map<KeyframeId, int> votes;
  for (PointId id : seeds) {
    for (const Observation& o : map.point(id).observers) ++votes[o.keyframe];
  }
  std::optional<KeyframeId> best;
  int most = 0;
  for (const auto& [kf, n] : votes) {
    if (n > most) {
      most = n;
      best = kf;
    }
  }
  return best;
}

/// Cluster refresh, local map matching, pose optimization, descriptor update
/// and reload around the coarse pose `Tbar`.
void refine(TrackState& state, const LocFrame& frame, const VisualMap& map, const Intrinsics& K,
            const LocalizerConfig& cfg, const Pose& Tbar, const std::vector<PointId>& seeds,
            LocResult& result) {
  const LocalFeatures& feats = frame.features.local;
  auto t0 = Clock::now();
  if (const auto seed = best_keyframe(map, seeds)) {
    const std::vector<KeyframeId> cluster = covisibility_cluster(map, *seed, cfg.w_min);
    state.active_cluster = {cluster.begin(), cluster.end()};
  }
  std::vector<KeyframeId> cluster(state.active_cluster.begin(), state.active_cluster.end());
  state.local_map.clear();
  for (PointId id : cluster_points(map, cluster)) {
    const MapPoint& mp = map.point(id);
    const auto w = state.working_descriptors.find(id);
    state.local_map.push_back(
        {id, mp.position, w != state.working_descriptors.end() ? w->second : mp.descriptor});
  }
  const std::vector<Association> matches =
      local_map_match(state.local_map, feats, Tbar, K, cfg.match_radius, cfg.match);
  result.timing.map_matching = ms_since(t0);

  t0 = Clock::now();
  std::vector<Correspondence> corrs;
  corrs.reserve(matches.size());
  for (const Association& a : matches) {
    corrs.push_back({feats.keypoints[a.keypoint], map.point(a.point).position});
  }
  const PoseOptResult opt = pose_optimize(corrs, Tbar, K, cfg.optimize);
  result.timing.optimization = ms_since(t0);

  t0 = Clock::now();
  std::vector<std::int64_t> points(feats.size(), kNoPoint);
  std::vector<bool> used_kp(feats.size(), false);
  std::map<PointId, bool> used_point;
  std::size_t inliers = 0;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    if (opt.outlier[i]) continue;
    const Association& a = matches[i];
    points[a.keypoint] = a.point;
    used_kp[a.keypoint] = true;
    used_point[a.point] = true;
    state.working_descriptors[a.point] =
        feats.descriptors.row(static_cast<Eigen::Index>(a.keypoint)).transpose();
    ++inliers;
  }
  std::vector<bool> skip_points(state.local_map.size());
  for (std::size_t m = 0; m < state.local_map.size(); ++m) {
    skip_points[m] = used_point.count(state.local_map[m].id) > 0;
  }
  const std::vector<Association> reloaded = local_map_match(
      state.local_map, feats, opt.pose, K, cfg.reload_radius, cfg.match, &used_kp, &skip_points);
  for (const Association& a : reloaded) points[a.keypoint] = a.point;
  result.timing.reload = ms_since(t0);

  const std::size_t tracked = inliers + reloaded.size();
  if (tracked < cfg.track.min_tracked) {
    throw Error(ErrorCode::kTrackingLost, "localization kept " + std::to_string(tracked) +
                                              " associations, need " +
                                              std::to_string(cfg.track.min_tracked));
  }
  state.last_pose = opt.pose;
  state.last_points = std::move(points);
  result.ok = true;
  result.pose = opt.pose;
  result.inliers = inliers;
  result.tracked = tracked;
}

}  // namespace

void LocalizerConfig::validate() const {
  if (!(match_radius > 0.0) || !(reload_radius > 0.0) || w_min < 0) {
    throw Error(ErrorCode::kConfig, "localizer: invalid configuration");
  }
  reloc.validate();
  track.validate();
  optimize.validate();
}

LocResult localize_step(TrackState& state, const LocFrame& frame, const VisualMap& map,
                        const Intrinsics& K, const LocalizerConfig& cfg) {
  cfg.validate();
  const auto start = Clock::now();
  LocResult result;
  state.last_error.reset();
  bool relocalize_now = state.mode == TrackMode::kRelocalizing;

  if (state.mode == TrackMode::kTracking) {
    try {
      const auto t0 = Clock::now();
      const FrameTrackResult ft = frame_track(state, frame, map, K, cfg.track);
      result.timing.tracking = ms_since(t0);
      std::vector<PointId> seeds;
      for (std::size_t i = 0; i < ft.points.size(); ++i) {
        if (ft.inlier[i]) seeds.push_back(ft.points[i]);
      }
      result.mode = TrackMode::kTracking;
      refine(state, frame, map, K, cfg, ft.Tbar, seeds, result);
    } catch (const Error& e) {
      if (!recoverable(e.code())) throw;
      result = LocResult{};
      result.tracking_lost = true;
      result.error = e.code();
      state.mode = TrackMode::kRelocalizing;
      relocalize_now = cfg.relocalize_on_loss;
    }
  }

  if (relocalize_now) {
    const StageTimings kept = result.timing;
    try {
      const auto t0 = Clock::now();
      const RelocResult rr =
          relocalize(frame.features.local, frame.features.global, map, K, cfg.reloc);
      result.timing.relocalization = ms_since(t0);
      std::vector<PointId> seeds;
      for (const Association& a : rr.associations) seeds.push_back(a.point);
      state.active_cluster = {rr.cluster.begin(), rr.cluster.end()};
      result.mode = TrackMode::kRelocalizing;
      refine(state, frame, map, K, cfg, rr.pose, seeds, result);
      state.mode = TrackMode::kTracking;
    } catch (const Error& e) {
      if (!recoverable(e.code())) throw;
      const bool lost = result.tracking_lost;
      result = LocResult{};
      result.timing = kept;
      result.tracking_lost = lost;
      result.error = e.code();
      state.mode = TrackMode::kRelocalizing;
    }
  }

  if (result.ok) {
    state.consecutive_failures = 0;
  } else {
    ++state.consecutive_failures;
    state.last_error = result.error;
    state.last_points.assign(frame.features.local.size(), kNoPoint);
    result.pose = state.last_pose;
  }
  state.last_features = frame.features.local;
  if (frame.image) {
    state.last_image = *frame.image;
  } else {
    state.last_image = Image();
  }
  result.timing.total = ms_since(start);
  return result;
}

const char* mode_name(TrackMode mode) {
  return mode == TrackMode::kTracking ? "tracking" : "relocalizing";
}

std::size_t TrackState::associated_count() const {
  std::size_t n = 0;
  for (std::int64_t p : last_points) n += p != kNoPoint ? 1 : 0;
  return n;
}

}  // namespace priorloc
