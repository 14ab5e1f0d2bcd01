#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "priorloc/common/error.hpp"
#include "priorloc/localizer/local_map_matching.hpp"

namespace priorloc {

enum class TrackMode { kRelocalizing, kTracking };

const char* mode_name(TrackMode mode);

/// One frame of the localization stream. `image` is optional; when both the
/// previous and current frame carry images, frame tracking uses LK.
struct LocFrame {
  std::int64_t index = -1;
  double timestamp = 0.0;
  Extraction features;
  const Image* image = nullptr;
};

struct TrackState {
  TrackMode mode = TrackMode::kRelocalizing;
  Pose last_pose;
  LocalFeatures last_features;
  /// Map point per keypoint of `last_features`, kNoPoint when unassociated.
  std::vector<std::int64_t> last_points;
  Image last_image;
  std::set<KeyframeId> active_cluster;
  std::vector<LocalMapPoint> local_map;
  /// Session copies of map-point descriptors, updated from inlier
  /// observations. The persistent map is never written.
  std::map<PointId, Eigen::VectorXd> working_descriptors;
  int consecutive_failures = 0;
  std::optional<ErrorCode> last_error;

  std::size_t associated_count() const;
};

}  // namespace priorloc
