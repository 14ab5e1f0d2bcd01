#pragma once

#include <span>
#include <vector>

#include "priorloc/mapper/factors.hpp"

namespace priorloc {

/// A keypoint pixel paired with a known world point.
struct Correspondence {
  Vec2 pixel;
  Vec3 point;
};

struct PoseOptConfig {
  double sigma_pixel = 1.0;                // px
  double huber_pixel = 2.0;                // px
  bool use_prior = true;
  double sigma_prior_t = 0.2;              // m
  double sigma_prior_r = 2.0 * kDegToRad;  // rad
  double huber_prior = 3.0;                // whitened units
  double outlier_sigma = 3.0;              // flag residuals above this many sigma
  /// Re-run LM without the flagged correspondences, then flag again.
  bool refit_inliers = true;
  int max_iterations = 20;
  double initial_lambda = 1e-4;
  double function_tolerance = 1e-12;
  double step_tolerance = 1e-12;

  void validate() const;
};

struct PoseOptResult {
  Pose pose;
  std::vector<bool> outlier;  // per correspondence
  double initial_cost = 0.0;
  double final_cost = 0.0;
  /// Initial cost, then after each accepted step. A refit continues the
  /// history with the outlier terms dropped, which can only lower the cost.
  std::vector<double> cost_history;
  int iterations = 0;

  std::size_t inlier_count() const;
};

/// Whitened residual stack of the pose-only problem at T: two rows per
/// correspondence, then six prior rows when the prior is enabled. A point not
/// in front of the camera contributes a constant residual with zero Jacobian.
/// `J` (optional) is the Jacobian with respect to the pose update
/// [dt; dphi] with t <- t + dt, R <- R Exp(dphi).
Eigen::VectorXd pose_only_residuals(std::span<const Correspondence> corrs, const Pose& T,
                                    const Pose& prior, const Intrinsics& K,
                                    const PoseOptConfig& cfg, Eigen::MatrixXd* J = nullptr);

/// Robust cost of the pose-only problem at T.
double pose_only_cost(std::span<const Correspondence> corrs, const Pose& T, const Pose& prior,
                      const Intrinsics& K, const PoseOptConfig& cfg);

/// LM over the 6-dof pose from `Tbar`, minimizing Huber visual residuals plus
/// the prior residual against `Tbar`. Steps are accepted only when the cost
/// decreases. Correspondences with a post-fit residual above outlier_sigma
/// are flagged, and with `refit_inliers` the pose is refined once more
/// without them. Throws TooFewAssociations with fewer than 4 correspondences and
/// Diverged if the final cost exceeds the initial one.
PoseOptResult pose_optimize(std::span<const Correspondence> corrs, const Pose& Tbar,
                            const Intrinsics& K, const PoseOptConfig& cfg = {});

}  // namespace priorloc
