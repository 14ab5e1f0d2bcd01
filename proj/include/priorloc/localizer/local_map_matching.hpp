#pragma once

#include <vector>

#include "priorloc/features/local_features.hpp"
#include "priorloc/mapper/visual_map.hpp"

namespace priorloc {

/// A map point as seen by the localizer, with its session working descriptor.
struct LocalMapPoint {
  PointId id = 0;
  Vec3 position = Vec3::Zero();
  Eigen::VectorXd descriptor;
};

struct Association {
  std::size_t keypoint = 0;
  PointId point = 0;
  double distance = 0.0;  // cosine descriptor distance
};

struct MapMatchConfig {
  double desc_gate = 0.7;  // cosine distance, exclusive
  double border = 0.0;     // px, projections this close to the edge are skipped
};

/// Projects every local-map point through `Tbar`, takes the keypoint within
/// `radius` px with the smallest descriptor distance below the gate, and
/// resolves keypoints claimed twice in favor of the smaller distance (ties by
/// point id). Output is one-to-one, sorted by keypoint. Points in
/// `skip_points` and keypoints flagged in `skip_keypoints` are not matched.
std::vector<Association> local_map_match(const std::vector<LocalMapPoint>& local_map,
                                         const LocalFeatures& feats, const Pose& Tbar,
                                         const Intrinsics& K, double radius,
                                         const MapMatchConfig& cfg = {},
                                         const std::vector<bool>* skip_keypoints = nullptr,
                                         const std::vector<bool>* skip_points = nullptr);

}  // namespace priorloc
