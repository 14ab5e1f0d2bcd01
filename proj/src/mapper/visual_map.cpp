#include "priorloc/mapper/visual_map.hpp"

#include <algorithm>
#include <cmath>

#include "priorloc/common/error.hpp"

namespace priorloc {

bool Keyframe::operator==(const Keyframe& o) const {
  return id == o.id && timestamp == o.timestamp && frame_index == o.frame_index &&
         pose.rotation().coeffs() == o.pose.rotation().coeffs() &&
         pose.translation() == o.pose.translation() &&
         prior_pose.rotation().coeffs() == o.prior_pose.rotation().coeffs() &&
         prior_pose.translation() == o.prior_pose.translation() && features == o.features &&
         global_desc.size() == o.global_desc.size() && global_desc == o.global_desc &&
         point_of_keypoint == o.point_of_keypoint;
}

bool MapPoint::operator==(const MapPoint& o) const {
  return id == o.id && position == o.position && descriptor.size() == o.descriptor.size() &&
         descriptor == o.descriptor && observers == o.observers;
}

KeyframeId VisualMap::add_keyframe(Keyframe kf) {
  kf.id = static_cast<KeyframeId>(keyframes_.size());
  kf.point_of_keypoint.assign(kf.features.size(), kNoPoint);
  keyframes_.push_back(std::move(kf));
  return keyframes_.back().id;
}

PointId VisualMap::add_point(const Vec3& position, const std::vector<Observation>& observers) {
  const PointId id = next_point_++;
  MapPoint mp;
  mp.id = id;
  mp.position = position;
  points_.emplace(id, std::move(mp));
  for (const auto& o : observers) add_observation(id, o);
  refresh_descriptor(id);
  return id;
}

void VisualMap::add_observation(PointId point, const Observation& obs) {
  Keyframe& kf = keyframes_.at(obs.keyframe);
  if (obs.keypoint >= kf.point_of_keypoint.size()) {
    throw Error(ErrorCode::kInternal, "observation keypoint out of range");
  }
  auto& slot = kf.point_of_keypoint[obs.keypoint];
  if (slot != kNoPoint) throw Error(ErrorCode::kInternal, "keypoint already associated");
  slot = point;
  auto& obsv = points_.at(point).observers;
  obsv.insert(std::upper_bound(obsv.begin(), obsv.end(), obs), obs);
}

void VisualMap::remove_observation(PointId point, const Observation& obs) {
  auto& obsv = points_.at(point).observers;
  const auto it = std::lower_bound(obsv.begin(), obsv.end(), obs);
  if (it == obsv.end() || *it != obs) return;
  obsv.erase(it);
  keyframes_.at(obs.keyframe).point_of_keypoint[obs.keypoint] = kNoPoint;
}

void VisualMap::remove_point(PointId point) {
  const auto it = points_.find(point);
  if (it == points_.end()) return;
  for (const auto& o : it->second.observers) {
    keyframes_.at(o.keyframe).point_of_keypoint[o.keypoint] = kNoPoint;
  }
  points_.erase(it);
}

void VisualMap::refresh_descriptor(PointId id) {
  MapPoint& mp = points_.at(id);
  if (mp.observers.empty()) return;
  Eigen::VectorXd sum;
  for (const auto& o : mp.observers) {
    const auto row = keyframes_.at(o.keyframe).features.descriptors.row(o.keypoint).transpose();
    if (sum.size() == 0) sum = Eigen::VectorXd::Zero(row.size());
    sum += row;
  }
  const double n = sum.norm();
  if (n > 0.0) {
    mp.descriptor = sum / n;
  } else {
    const auto& o = mp.observers.front();
    mp.descriptor = keyframes_.at(o.keyframe).features.descriptors.row(o.keypoint).transpose();
  }
}

void VisualMap::finalize() {
  covis_.assign(keyframes_.size(), {});
  for (const auto& [id, mp] : points_) {
    for (std::size_t a = 0; a < mp.observers.size(); ++a) {
      for (std::size_t b = a + 1; b < mp.observers.size(); ++b) {
        const KeyframeId ka = mp.observers[a].keyframe, kb = mp.observers[b].keyframe;
        if (ka == kb) continue;
        ++covis_[ka][kb];
        ++covis_[kb][ka];
      }
    }
  }
  const Eigen::Index G = keyframes_.empty() ? 0 : keyframes_.front().global_desc.size();
  global_index_.resize(static_cast<Eigen::Index>(keyframes_.size()), G);
  for (std::size_t i = 0; i < keyframes_.size(); ++i) {
    if (keyframes_[i].global_desc.size() != G) {
      throw Error(ErrorCode::kDimMismatch, "keyframe global descriptors differ in size");
    }
    global_index_.row(static_cast<Eigen::Index>(i)) = keyframes_[i].global_desc.transpose();
  }
}

int VisualMap::covisibility(KeyframeId a, KeyframeId b) const {
  if (a >= covis_.size()) return 0;
  const auto it = covis_[a].find(b);
  return it == covis_[a].end() ? 0 : it->second;
}

std::vector<std::pair<KeyframeId, int>> VisualMap::covisible(KeyframeId id,
                                                             int min_weight) const {
  std::vector<std::pair<KeyframeId, int>> out;
  if (id >= covis_.size()) return out;
  for (const auto& [k, w] : covis_[id]) {
    if (w >= min_weight) out.emplace_back(k, w);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

std::vector<RetrievalHit> VisualMap::retrieve(const GlobalDescriptor& query, std::size_t k,
                                              double min_similarity) const {
  std::vector<RetrievalHit> hits;
  if (global_index_.rows() == 0 || query.size() != global_index_.cols()) {
    if (global_index_.rows() > 0) {
      throw Error(ErrorCode::kDimMismatch, "query global descriptor has the wrong size");
    }
    return hits;
  }
  for (Eigen::Index i = 0; i < global_index_.rows(); ++i) {
    const double s = global_index_.row(i).dot(query);
    if (s >= min_similarity) hits.push_back({static_cast<KeyframeId>(i), s});
  }
  std::stable_sort(hits.begin(), hits.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
    return a.similarity > b.similarity;
  });
  if (hits.size() > k) hits.resize(k);
  return hits;
}

void VisualMap::validate() const {
  for (const auto& kf : keyframes_) {
    if (kf.point_of_keypoint.size() != kf.features.size()) {
      throw Error(ErrorCode::kCorrupt, "keyframe association table has the wrong size");
    }
    for (std::size_t k = 0; k < kf.point_of_keypoint.size(); ++k) {
      const auto p = kf.point_of_keypoint[k];
      if (p == kNoPoint) continue;
      const auto it = points_.find(static_cast<PointId>(p));
      if (it == points_.end() ||
          !std::binary_search(it->second.observers.begin(), it->second.observers.end(),
                              Observation{kf.id, static_cast<std::uint32_t>(k)})) {
        throw Error(ErrorCode::kCorrupt, "dangling keypoint association");
      }
    }
  }
  for (const auto& [id, mp] : points_) {
    if (std::abs(mp.descriptor.norm() - 1.0) > 1e-6) {
      throw Error(ErrorCode::kCorrupt, "map point descriptor is not unit-norm");
    }
    for (const auto& o : mp.observers) {
      if (o.keyframe >= keyframes_.size() ||
          o.keypoint >= keyframes_[o.keyframe].point_of_keypoint.size() ||
          keyframes_[o.keyframe].point_of_keypoint[o.keypoint] != static_cast<std::int64_t>(id)) {
        throw Error(ErrorCode::kCorrupt, "map point observer does not resolve");
      }
    }
  }
  for (std::size_t a = 0; a < covis_.size(); ++a) {
    for (const auto& [b, w] : covis_[a]) {
      if (b >= covis_.size() || covisibility(b, static_cast<KeyframeId>(a)) != w) {
        throw Error(ErrorCode::kCorrupt, "co-visibility graph is not symmetric");
      }
    }
  }
  if (static_cast<std::size_t>(global_index_.rows()) != keyframes_.size()) {
    throw Error(ErrorCode::kCorrupt, "global index does not cover every keyframe");
  }
}

bool VisualMap::operator==(const VisualMap& o) const {
  return K_ == o.K_ && keyframes_ == o.keyframes_ && points_ == o.points_ &&
         next_point_ == o.next_point_ && covis_ == o.covis_ &&
         global_index_.rows() == o.global_index_.rows() &&
         global_index_.cols() == o.global_index_.cols() && global_index_ == o.global_index_;
}

void VisualMap::restore(Intrinsics K, std::vector<Keyframe> kfs, std::map<PointId, MapPoint> pts,
                        std::vector<std::map<KeyframeId, int>> covis, DescriptorMatrix index,
                        PointId next_point) {
  K_ = K;
  keyframes_ = std::move(kfs);
  points_ = std::move(pts);
  covis_ = std::move(covis);
  global_index_ = std::move(index);
  next_point_ = next_point;
}

}  // namespace priorloc
