#pragma once

#include <vector>

#include "priorloc/registration/cov_cloud.hpp"

namespace priorloc {

struct GicpConfig {
  double max_correspondence_distance = 1.0;  // m
  int max_iterations = 50;
  double tol_translation = 1e-5;  // m, displacement of the source centroid
  double tol_rotation = 1e-5;     // rad
  int max_step_halvings = 10;

  void validate() const;
};

struct GicpIteration {
  std::size_t correspondences = 0;
  double cost_before = 0.0;  // at the start of the iteration
  double cost_after = 0.0;   // same associations and weights, updated pose
};

struct GicpResult {
  Pose pose;
  bool converged = false;
  int iterations = 0;
  std::size_t correspondences = 0;
  /// Mean Mahalanobis cost over the final association.
  double final_cost = 0.0;
  /// Gauss-Newton Hessian at the final association, variables [rho; phi] of
  /// a left perturbation Exp(xi) * T.
  Mat6 hessian = Mat6::Zero();
  std::vector<GicpIteration> history;
};

/// Residual `target - T * source` of one correspondence.
Vec3 gicp_residual(const Pose& T, const Vec3& source, const Vec3& target);

/// Jacobian of gicp_residual with respect to xi, where T <- se3_exp(xi) * T,
/// evaluated at xi = 0.
Eigen::Matrix<double, 3, 6> gicp_jacobian(const Pose& T, const Vec3& source);

/// Estimates the transform taking `source` into the frame of `target` by
/// minimizing sum d^T (C_t + R C_s R^T)^-1 d over nearest-neighbor
/// correspondences, re-associating every iteration.
///
/// Throws NoCorrespondences when no source point has a neighbor within the
/// gating radius. Hitting max_iterations is reported through `converged`.
GicpResult gicp(const CovCloud& source, const CovCloud& target, const Pose& T_init,
                const GicpConfig& cfg = {});

}  // namespace priorloc
