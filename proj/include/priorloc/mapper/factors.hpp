#pragma once

#include "priorloc/geometry/camera.hpp"

namespace priorloc {

using Mat26 = Eigen::Matrix<double, 2, 6>;
using Mat23 = Eigen::Matrix<double, 2, 3>;

/// Huber kernel on a squared normalized residual s: rho(s) = s inside the
/// threshold, 2 delta sqrt(s) - delta^2 outside. Costs are 0.5 rho(s).
struct Huber {
  double delta = 1.0;

  double rho(double s) const;
  /// rho'(s), the IRLS weight.
  double weight(double s) const;
};

/// Pose updates are [dt; dphi] with t <- t + dt and R <- R Exp(dphi).
Pose apply_pose_update(const Pose& T, const Vec6& delta);

/// Visual residual pi(T, p) - x (pixels). Jacobians are optional outputs.
/// Returns false (leaving outputs untouched) when p is not in front of the
/// camera.
bool visual_residual(const Intrinsics& K, const Pose& T_wc, const Vec3& p, const Vec2& x,
                     Vec2* residual, Mat26* J_pose = nullptr, Mat23* J_point = nullptr);

/// Structure residual p - p_hit; its Jacobian with respect to p is I.
inline Vec3 structure_residual(const Vec3& p, const Vec3& hit) { return p - hit; }

/// Prior residual pose_error(T, prior) and its Jacobian with respect to the
/// pose update of T.
Vec6 prior_residual(const Pose& T, const Pose& prior, Mat6* J_pose = nullptr);

}  // namespace priorloc
