#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "priorloc/features/local_features.hpp"

namespace priorloc {

using KeyframeId = std::uint32_t;
using PointId = std::uint32_t;
inline constexpr std::int64_t kNoPoint = -1;

struct Observation {
  KeyframeId keyframe;
  std::uint32_t keypoint;

  auto operator<=>(const Observation&) const = default;
};

struct Keyframe {
  KeyframeId id = 0;
  double timestamp = 0.0;
  std::int64_t frame_index = -1;  // source frame in the mapping sequence
  Pose pose;                      // optimized
  Pose prior_pose;
  LocalFeatures features;
  GlobalDescriptor global_desc;
  /// Map point per keypoint, kNoPoint when unassociated.
  std::vector<std::int64_t> point_of_keypoint;

  Vec3 center() const { return pose.translation(); }
  bool operator==(const Keyframe& o) const;
};

struct MapPoint {
  PointId id = 0;
  Vec3 position = Vec3::Zero();
  Eigen::VectorXd descriptor;
  std::vector<Observation> observers;  // sorted

  bool operator==(const MapPoint& o) const;
};

struct RetrievalHit {
  KeyframeId keyframe;
  double similarity;
};

class VisualMap {
 public:
  VisualMap() = default;
  explicit VisualMap(Intrinsics K) : K_(K) {}

  const Intrinsics& intrinsics() const { return K_; }

  KeyframeId add_keyframe(Keyframe kf);
  Keyframe& keyframe(KeyframeId id) { return keyframes_.at(id); }
  const Keyframe& keyframe(KeyframeId id) const { return keyframes_.at(id); }
  const std::vector<Keyframe>& keyframes() const { return keyframes_; }
  std::size_t keyframe_count() const { return keyframes_.size(); }

  /// Creates a point observed by `observers` (each keypoint must be free).
  PointId add_point(const Vec3& position, const std::vector<Observation>& observers);
  void add_observation(PointId point, const Observation& obs);
  void remove_observation(PointId point, const Observation& obs);
  void remove_point(PointId point);
  bool has_point(PointId id) const { return points_.count(id) > 0; }
  MapPoint& point(PointId id) { return points_.at(id); }
  const MapPoint& point(PointId id) const { return points_.at(id); }
  const std::map<PointId, MapPoint>& points() const { return points_; }
  std::size_t point_count() const { return points_.size(); }

  /// Representative descriptor of a point: normalized mean of its observed
  /// descriptors.
  void refresh_descriptor(PointId id);

  /// Rebuilds co-visibility edges and the global-descriptor index.
  void finalize();
  /// Shared map-point count between two keyframes (0 when unconnected).
  int covisibility(KeyframeId a, KeyframeId b) const;
  /// Neighbors with weight >= min_weight, heaviest first (ties by id).
  std::vector<std::pair<KeyframeId, int>> covisible(KeyframeId id, int min_weight) const;
  const std::vector<std::map<KeyframeId, int>>& covisibility_graph() const { return covis_; }
  const DescriptorMatrix& global_index() const { return global_index_; }

  /// Top-k keyframes by cosine similarity of global descriptors (ties by
  /// id), excluding those below `min_similarity`.
  std::vector<RetrievalHit> retrieve(const GlobalDescriptor& query, std::size_t k,
                                     double min_similarity = -1.0) const;

  /// Throws Corrupt when an invariant is broken.
  void validate() const;

  bool operator==(const VisualMap& o) const;

  // Direct restoration used by deserialization.
  void restore(Intrinsics K, std::vector<Keyframe> kfs, std::map<PointId, MapPoint> pts,
               std::vector<std::map<KeyframeId, int>> covis, DescriptorMatrix index,
               PointId next_point);
  PointId next_point_id() const { return next_point_; }

 private:
  Intrinsics K_;
  std::vector<Keyframe> keyframes_;
  std::map<PointId, MapPoint> points_;
  PointId next_point_ = 0;
  std::vector<std::map<KeyframeId, int>> covis_;
  DescriptorMatrix global_index_;
};

}  // namespace priorloc
