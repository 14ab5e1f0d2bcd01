#pragma once

#include <memory>
#include <span>
#include <vector>

#include "priorloc/geometry/pose.hpp"
#include "priorloc/registration/kdtree.hpp"

namespace priorloc {

/// Point cloud with per-point 3x3 covariances and a kd-tree over the points.
/// Immutable once built; copies share the index.
class CovCloud {
 public:
  CovCloud() = default;
  /// Throws Corrupt on size mismatch or a non-symmetric / non-PSD covariance.
  CovCloud(std::vector<Vec3> points, std::vector<Mat3> covariances);

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const std::vector<Vec3>& points() const { return points_; }
  const std::vector<Mat3>& covariances() const { return covariances_; }
  const KdTree3& index() const { return *index_; }

  /// Points mapped by T; covariances rotated as R C R^T (never translated).
  CovCloud transformed(const Pose& T) const;

 private:
  std::vector<Vec3> points_;
  std::vector<Mat3> covariances_;
  std::shared_ptr<const KdTree3> index_ = std::make_shared<KdTree3>();
};

/// Sample covariance of each point's k nearest neighbors, regularized to
/// eigenvalues (1, 1, epsilon) in its eigenbasis; a neighborhood with no
/// spread becomes epsilon * I. Throws TooFewPoints if points.size() < k or
/// k < 4.
CovCloud compute_covariances(std::span<const Vec3> points, int k, double epsilon = 1e-3);

/// Centroid per occupied leaf cell, in sorted cell order.
std::vector<Vec3> voxel_downsample(std::span<const Vec3> points, double leaf_size);

}  // namespace priorloc
