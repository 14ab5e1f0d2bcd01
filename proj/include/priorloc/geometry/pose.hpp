#pragma once

#include "priorloc/geometry/types.hpp"

namespace priorloc {

/// Rigid transform stored as a unit quaternion (scalar-first, scalar part
/// kept non-negative) and a translation in meters.
///
/// Camera and LiDAR poses follow the sensor-to-world convention: applying a
/// pose to a point expressed in the sensor frame yields world coordinates.
class Pose {
 public:
  Pose() : q_(Quat::Identity()), t_(Vec3::Zero()) {}
  Pose(const Quat& q, const Vec3& t);

  static Pose Identity() { return Pose(); }
  static Pose FromMatrix(const Mat3& R, const Vec3& t);
  static Pose FromAxisAngle(const Vec3& axis, double angle, const Vec3& t);

  const Quat& rotation() const { return q_; }
  Mat3 rotation_matrix() const { return q_.toRotationMatrix(); }
  const Vec3& translation() const { return t_; }
  Eigen::Matrix4d matrix() const;

  Pose inverse() const;
  Pose operator*(const Pose& other) const;
  Vec3 operator*(const Vec3& p) const { return q_ * p + t_; }

  bool is_finite() const;

 private:
  Quat q_;
  Vec3 t_;
};

/// Normalizes and flips `q` so that its scalar part is non-negative.
Quat canonical(const Quat& q);

/// SO(3) exponential / logarithm on quaternions (rotation vectors in rad).
Quat quat_exp(const Vec3& rotvec);
Vec3 quat_log(const Quat& q);

/// SE(3) exponential of `xi = [rho; phi]`: rotation Exp(phi), translation
/// V(phi) rho.
Pose se3_exp(const Vec6& xi);

/// Angle (rad) of the relative rotation between two quaternions.
double rotation_angle(const Quat& a, const Quat& b);

/// Spherical linear interpolation along the shortest arc, s in [0,1].
Quat slerp(const Quat& q0, const Quat& q1, double s);

/// Linear translation / slerp rotation interpolation at time `tk` between
/// the bracketing poses at `tl` and `tr`.
///
/// Throws DegenerateInterval when `tr - tl` is below 1e-9 and OutOfRange when
/// `tk` lies outside `[tl, tr]`.
Pose interpolate_pose(const Pose& left, const Pose& right, double tl, double tr,
                      double tk);

/// Prior residual `[t_prior - t; 2 vec(q^-1 q_prior)]`, hemisphere-corrected.
Vec6 pose_error(const Pose& estimate, const Pose& prior);

}  // namespace priorloc
