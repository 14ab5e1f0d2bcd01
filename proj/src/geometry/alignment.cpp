#include "priorloc/geometry/alignment.hpp"

#include <Eigen/SVD>
#include <cmath>

#include "priorloc/common/error.hpp"

namespace priorloc {

std::vector<std::pair<std::size_t, std::size_t>> associate(const Trajectory& est,
                                                           const Trajectory& ref,
                                                           double tolerance) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::vector<bool> used(ref.size(), false);
  for (std::size_t i = 0; i < est.size(); ++i) {
    const long j = ref.nearest(est[i].timestamp, tolerance);
    if (j < 0 || used[static_cast<std::size_t>(j)]) continue;
    used[static_cast<std::size_t>(j)] = true;
    pairs.emplace_back(i, static_cast<std::size_t>(j));
  }
  return pairs;
}

Pose umeyama_se3(std::span<const Vec3> src, std::span<const Vec3> dst) {
  if (src.size() != dst.size()) {
    throw Error(ErrorCode::kDegenerate, "point sets differ in size");
  }
  const std::size_t n = src.size();
  if (n < 3) throw Error(ErrorCode::kDegenerate, "need at least 3 point pairs");

  Vec3 mu_s = Vec3::Zero(), mu_d = Vec3::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    mu_s += src[i];
    mu_d += dst[i];
  }
  mu_s /= static_cast<double>(n);
  mu_d /= static_cast<double>(n);

  Mat3 sigma = Mat3::Zero();
  double spread = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sigma += (dst[i] - mu_d) * (src[i] - mu_s).transpose();
    spread += (src[i] - mu_s).squaredNorm() + (dst[i] - mu_d).squaredNorm();
  }
  sigma /= static_cast<double>(n);

  Eigen::JacobiSVD<Mat3> svd(sigma, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  const double scale = std::max(spread / static_cast<double>(n), 1e-300);
  if (sv(0) <= 1e-14 * scale || sv(1) <= 1e-10 * sv(0)) {
    throw Error(ErrorCode::kDegenerate, "rank-deficient cross-covariance (collinear points)");
  }
  Mat3 S = Mat3::Identity();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) S(2, 2) = -1.0;
  const Mat3 R = svd.matrixU() * S * svd.matrixV().transpose();
  return Pose::FromMatrix(R, mu_d - R * mu_s);
}

Pose umeyama_se3(const Trajectory& est, const Trajectory& ref, double tolerance) {
  const auto pairs = associate(est, ref, tolerance);
  std::vector<Vec3> src, dst;
  src.reserve(pairs.size());
  dst.reserve(pairs.size());
  for (auto [i, j] : pairs) {
    src.push_back(est[i].pose.translation());
    dst.push_back(ref[j].pose.translation());
  }
  return umeyama_se3(src, dst);
}

TrajectoryMetrics ape_rpe(const Trajectory& est, const Trajectory& ref, double tolerance) {
  const auto pairs = associate(est, ref, tolerance);
  if (pairs.empty()) throw Error(ErrorCode::kNoAssociations, "no timestamp pairs matched");

  TrajectoryMetrics m;
  m.pairs = pairs.size();
  {
    std::vector<Vec3> src, dst;
    for (auto [i, j] : pairs) {
      src.push_back(est[i].pose.translation());
      dst.push_back(ref[j].pose.translation());
    }
    m.alignment = umeyama_se3(src, dst);
  }

  std::vector<Pose> aligned, refs;
  double sum_t = 0.0, sq_t = 0.0, sum_r = 0.0, sq_r = 0.0;
  for (auto [i, j] : pairs) {
    const Pose a = m.alignment * est[i].pose;
    const Pose& r = ref[j].pose;
    const Pose diff = r.inverse() * a;
    const double et = diff.translation().norm();
    const double er = rotation_angle(r.rotation(), a.rotation()) * kRadToDeg;
    m.timestamps.push_back(est[i].timestamp);
    m.ape_trans.push_back(et);
    m.ape_rot.push_back(er);
    sum_t += et;
    sq_t += et * et;
    sum_r += er;
    sq_r += er * er;
    m.ape_trans_max = std::max(m.ape_trans_max, et);
    aligned.push_back(a);
    refs.push_back(r);
  }
  const double n = static_cast<double>(pairs.size());
  m.ape_trans_mean = sum_t / n;
  m.ape_trans_rmse = std::sqrt(sq_t / n);
  m.ape_rot_mean = sum_r / n;
  m.ape_rot_rmse = std::sqrt(sq_r / n);

  if (aligned.size() >= 2) {
    double rsum = 0.0, rsq = 0.0, rrot = 0.0;
    for (std::size_t k = 0; k + 1 < aligned.size(); ++k) {
      const Pose d_ref = refs[k].inverse() * refs[k + 1];
      const Pose d_est = aligned[k].inverse() * aligned[k + 1];
      const Pose e = d_ref.inverse() * d_est;
      const double et = e.translation().norm();
      rsum += et;
      rsq += et * et;
      rrot += rotation_angle(d_ref.rotation(), d_est.rotation()) * kRadToDeg;
    }
    const double nr = static_cast<double>(aligned.size() - 1);
    m.rpe_trans_mean = rsum / nr;
    m.rpe_trans_rmse = std::sqrt(rsq / nr);
    m.rpe_rot_mean = rrot / nr;
  }
  return m;
}

}  // namespace priorloc
