#include "priorloc/geometry/pose.hpp"

#include <cmath>

#include "priorloc/common/error.hpp"

namespace priorloc {

Quat canonical(const Quat& q) {
  // Already-unit inputs are left bit-identical so canonical() is idempotent.
  Quat out = q;
  if (std::abs(q.squaredNorm() - 1.0) > 1e-14) out.normalize();
  if (out.w() < 0.0) out.coeffs() = -out.coeffs();
  return out;
}

Pose::Pose(const Quat& q, const Vec3& t) : q_(canonical(q)), t_(t) {}

Pose Pose::FromMatrix(const Mat3& R, const Vec3& t) { return Pose(Quat(R), t); }

Pose Pose::FromAxisAngle(const Vec3& axis, double angle, const Vec3& t) {
  return Pose(Quat(Eigen::AngleAxisd(angle, axis.normalized())), t);
}

Eigen::Matrix4d Pose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation_matrix();
  m.topRightCorner<3, 1>() = t_;
  return m;
}

Pose Pose::inverse() const {
  const Quat qi = q_.conjugate();
  return Pose(qi, -(qi * t_));
}

Pose Pose::operator*(const Pose& other) const {
  return Pose(q_ * other.q_, q_ * other.t_ + t_);
}

bool Pose::is_finite() const { return q_.coeffs().allFinite() && t_.allFinite(); }

Quat quat_exp(const Vec3& rotvec) {
  const double theta = rotvec.norm();
  const double half = 0.5 * theta;
  // sin(x)/x series below the threshold keeps the map smooth at zero.
  const double k = theta < 1e-8 ? 0.5 - theta * theta / 48.0 : std::sin(half) / theta;
  return Quat(std::cos(half), k * rotvec.x(), k * rotvec.y(), k * rotvec.z());
}

Vec3 quat_log(const Quat& q_in) {
  const Quat q = canonical(q_in);
  const Vec3 v = q.vec();
  const double n = v.norm();
  if (n < 1e-12) return 2.0 * v;
  const double theta = 2.0 * std::atan2(n, q.w());
  return v * (theta / n);
}

Pose se3_exp(const Vec6& xi) {
  const Vec3 rho = xi.head<3>();
  const Vec3 phi = xi.tail<3>();
  const double theta = phi.norm();
  const Mat3 K = skew(phi);
  double a, b;
  if (theta < 1e-5) {
    a = 0.5 - theta * theta / 24.0;
    b = 1.0 / 6.0 - theta * theta / 120.0;
  } else {
    a = (1.0 - std::cos(theta)) / (theta * theta);
    b = (theta - std::sin(theta)) / (theta * theta * theta);
  }
  const Mat3 V = Mat3::Identity() + a * K + b * K * K;
  return Pose(quat_exp(phi), V * rho);
}

double rotation_angle(const Quat& a, const Quat& b) {
  const Quat rel = canonical(a.conjugate() * b);
  return 2.0 * std::atan2(rel.vec().norm(), rel.w());
}

Quat slerp(const Quat& q0_in, const Quat& q1_in, double s) {
  const Quat q0 = q0_in.normalized();
  Quat q1 = q1_in.normalized();
  if (q0.dot(q1) < 0.0) q1.coeffs() = -q1.coeffs();
  const Quat rel = q0.conjugate() * q1;
  // rel has non-negative scalar part here, so its log is the short arc.
  const Vec3 v = rel.vec();
  const double n = v.norm();
  Vec3 rotvec = Vec3::Zero();
  if (n > 0.0) rotvec = v * (2.0 * std::atan2(n, rel.w()) / n);
  return canonical(q0 * quat_exp(s * rotvec));
}

Pose interpolate_pose(const Pose& left, const Pose& right, double tl, double tr,
                      double tk) {
  if (!(tr - tl >= 1e-9)) {
    throw Error(ErrorCode::kDegenerateInterval, "interpolation interval below 1e-9 s");
  }
  if (tk < tl || tk > tr) {
    throw Error(ErrorCode::kOutOfRange, "timestamp outside the bracketing interval");
  }
  if (tk == tl) return left;
  if (tk == tr) return right;
  const double s = (tk - tl) / (tr - tl);
  const Vec3 t = left.translation() + s * (right.translation() - left.translation());
  return Pose(slerp(left.rotation(), right.rotation(), s), t);
}

Vec6 pose_error(const Pose& estimate, const Pose& prior) {
  Vec6 e;
  e.head<3>() = prior.translation() - estimate.translation();
  const Quat rel = canonical(estimate.rotation().conjugate() * prior.rotation());
  e.tail<3>() = 2.0 * rel.vec();
  return e;
}

}  // namespace priorloc
