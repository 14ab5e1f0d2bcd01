#include "priorloc/features/local_features.hpp"

#include <cmath>

#include "priorloc/common/error.hpp"

namespace priorloc {

void LocalFeatures::validate(const Intrinsics* bounds) const {
  if (static_cast<std::size_t>(descriptors.rows()) != keypoints.size() ||
      scores.size() != keypoints.size() ||
      (!landmark_ids.empty() && landmark_ids.size() != keypoints.size())) {
    throw Error(ErrorCode::kCorrupt, "feature arrays differ in length");
  }
  for (Eigen::Index i = 0; i < descriptors.rows(); ++i) {
    if (std::abs(descriptors.row(i).norm() - 1.0) > 1e-6) {
      throw Error(ErrorCode::kCorrupt, "descriptor is not unit-norm");
    }
  }
  for (double s : scores) {
    if (!(s >= 0.0 && s <= 1.0)) throw Error(ErrorCode::kCorrupt, "score outside [0,1]");
  }
  if (bounds) {
    for (const Vec2& k : keypoints) {
      if (!bounds->in_image(k)) throw Error(ErrorCode::kCorrupt, "keypoint outside image");
    }
  }
}

LocalFeatures LocalFeatures::subset(std::span<const std::size_t> indices) const {
  LocalFeatures out;
  out.descriptors.resize(static_cast<Eigen::Index>(indices.size()), descriptors.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t i = indices[r];
    out.keypoints.push_back(keypoints[i]);
    out.descriptors.row(static_cast<Eigen::Index>(r)) =
        descriptors.row(static_cast<Eigen::Index>(i));
    out.scores.push_back(scores[i]);
    if (!landmark_ids.empty()) out.landmark_ids.push_back(landmark_ids[i]);
  }
  return out;
}

bool LocalFeatures::operator==(const LocalFeatures& o) const {
  return keypoints == o.keypoints && scores == o.scores && landmark_ids == o.landmark_ids &&
         descriptors.rows() == o.descriptors.rows() &&
         descriptors.cols() == o.descriptors.cols() && descriptors == o.descriptors;
}

void validate_global(const GlobalDescriptor& g) {
  if (g.size() == 0 || std::abs(g.norm() - 1.0) > 1e-6) {
    throw Error(ErrorCode::kCorrupt, "global descriptor is not unit-norm");
  }
}

}  // namespace priorloc
