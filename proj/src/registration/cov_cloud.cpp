#include "priorloc/registration/cov_cloud.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "priorloc/common/error.hpp"

namespace priorloc {

CovCloud::CovCloud(std::vector<Vec3> points, std::vector<Mat3> covariances)
    : points_(std::move(points)), covariances_(std::move(covariances)) {
  if (points_.size() != covariances_.size()) {
    throw Error(ErrorCode::kCorrupt, "points and covariances differ in count");
  }
  for (const Mat3& c : covariances_) {
    if (!c.allFinite() || (c - c.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
      throw Error(ErrorCode::kCorrupt, "covariance is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Mat3> es(c, Eigen::EigenvaluesOnly);
    if (es.eigenvalues()(0) < -1e-12) {
      throw Error(ErrorCode::kCorrupt, "covariance is not positive semi-definite");
    }
  }
  index_ = std::make_shared<KdTree3>(points_);
}

CovCloud CovCloud::transformed(const Pose& T) const {
  CovCloud out;
  out.points_.reserve(points_.size());
  out.covariances_.reserve(points_.size());
  const Mat3 R = T.rotation_matrix();
  for (std::size_t i = 0; i < points_.size(); ++i) {
    out.points_.push_back(T * points_[i]);
    Mat3 c = R * covariances_[i] * R.transpose();
    out.covariances_.push_back(0.5 * (c + c.transpose()));
  }
  out.index_ = std::make_shared<KdTree3>(out.points_);
  return out;
}

CovCloud compute_covariances(std::span<const Vec3> points, int k, double epsilon) {
  if (k < 4) throw Error(ErrorCode::kTooFewPoints, "neighbor count must be at least 4");
  if (points.size() < static_cast<std::size_t>(k)) {
    throw Error(ErrorCode::kTooFewPoints, "fewer points than neighbors requested");
  }
  const KdTree3 tree(points);
  std::vector<Mat3> covs;
  covs.reserve(points.size());
  for (const Vec3& p : points) {
    const auto nn = tree.knn(p, static_cast<std::size_t>(k));
    Vec3 mean = Vec3::Zero();
    for (const auto& n : nn) mean += points[n.index];
    mean /= static_cast<double>(nn.size());
    Mat3 c = Mat3::Zero();
    for (const auto& n : nn) {
      const Vec3 d = points[n.index] - mean;
      c += d * d.transpose();
    }
    c /= static_cast<double>(nn.size());
    if (c.trace() < 1e-18) {
      covs.push_back(epsilon * Mat3::Identity());
      continue;
    }
    Eigen::SelfAdjointEigenSolver<Mat3> es(c);
    const Mat3& V = es.eigenvectors();  // ascending eigenvalues
    const Vec3 reg(epsilon, 1.0, 1.0);
    Mat3 out = V * reg.asDiagonal() * V.transpose();
    covs.push_back(0.5 * (out + out.transpose()));
  }
  return CovCloud(std::vector<Vec3>(points.begin(), points.end()), std::move(covs));
}

std::vector<Vec3> voxel_downsample(std::span<const Vec3> points, double leaf_size) {
  if (!(leaf_size > 0.0)) return {points.begin(), points.end()};
  std::map<std::tuple<long, long, long>, std::pair<Vec3, int>> cells;
  for (const Vec3& p : points) {
    if (!p.allFinite()) continue;
    const auto key = std::make_tuple(static_cast<long>(std::floor(p.x() / leaf_size)),
                                     static_cast<long>(std::floor(p.y() / leaf_size)),
                                     static_cast<long>(std::floor(p.z() / leaf_size)));
    auto& cell = cells[key];
    if (cell.second == 0) cell.first = Vec3::Zero();
    cell.first += p;
    ++cell.second;
  }
  std::vector<Vec3> out;
  out.reserve(cells.size());
  for (const auto& [key, cell] : cells) out.push_back(cell.first / cell.second);
  return out;
}

}  // namespace priorloc
