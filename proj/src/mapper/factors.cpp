#include "priorloc/mapper/factors.hpp"

#include <cmath>

namespace priorloc {

double Huber::rho(double s) const {
  const double d2 = delta * delta;
  return s <= d2 ? s : 2.0 * delta * std::sqrt(s) - d2;
}

double Huber::weight(double s) const {
  return s <= delta * delta ? 1.0 : delta / std::sqrt(s);
}

Pose apply_pose_update(const Pose& T, const Vec6& delta) {
  return Pose(T.rotation() * quat_exp(delta.tail<3>()), T.translation() + delta.head<3>());
}

bool visual_residual(const Intrinsics& K, const Pose& T_wc, const Vec3& p, const Vec2& x,
                     Vec2* residual, Mat26* J_pose, Mat23* J_point) {
  const Mat3 Rt = T_wc.rotation_matrix().transpose();
  const Vec3 pc = Rt * (p - T_wc.translation());
  if (pc.z() <= kDefaultMinDepth) return false;
  const double iz = 1.0 / pc.z();
  if (residual) {
    *residual = Vec2(K.fx * pc.x() * iz + K.cx, K.fy * pc.y() * iz + K.cy) - x;
  }
  if (J_pose || J_point) {
    Mat23 Jproj;
    Jproj << K.fx * iz, 0.0, -K.fx * pc.x() * iz * iz, 0.0, K.fy * iz, -K.fy * pc.y() * iz * iz;
    if (J_pose) {
      J_pose->leftCols<3>() = -Jproj * Rt;
      J_pose->rightCols<3>() = Jproj * skew(pc);
    }
    if (J_point) *J_point = Jproj * Rt;
  }
  return true;
}

Vec6 prior_residual(const Pose& T, const Pose& prior, Mat6* J_pose) {
  Vec6 r;
  r.head<3>() = prior.translation() - T.translation();
  const Quat rel = canonical(T.rotation().conjugate() * prior.rotation());
  r.tail<3>() = 2.0 * rel.vec();
  if (J_pose) {
    J_pose->setZero();
    J_pose->topLeftCorner<3, 3>() = -Mat3::Identity();
    J_pose->bottomRightCorner<3, 3>() = -rel.w() * Mat3::Identity() + skew(rel.vec());
  }
  return r;
}

}  // namespace priorloc
