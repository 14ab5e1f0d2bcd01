#pragma once

#include <vector>

#include "priorloc/mapper/factors.hpp"

namespace priorloc {

struct VisualTerm {
  std::size_t camera;
  std::size_t point;
  Vec2 measurement;
  double sigma = 1.0;  // px
  Huber kernel;        // on the normalized residual
};

struct StructureTerm {
  std::size_t point;
  Vec3 target;
  double sigma = 0.1;  // m
  Huber kernel;
};

struct PriorTerm {
  std::size_t camera;
  Pose prior;
  double sigma_t = 0.05;  // m
  double sigma_r = 0.5 * kDegToRad;  // rad
  Huber kernel;
};

/// Poses, points, and robustified factors over them. Fixed variables keep
/// their values but their factors still contribute to the cost.
struct BundleProblem {
  Intrinsics K;
  std::vector<Pose> poses;
  std::vector<bool> pose_fixed;
  std::vector<Vec3> points;
  std::vector<bool> point_fixed;
  std::vector<VisualTerm> visual;
  std::vector<StructureTerm> structure;
  std::vector<PriorTerm> priors;

  std::size_t add_pose(const Pose& T, bool fixed = false);
  std::size_t add_point(const Vec3& p, bool fixed = false);
};

/// Cost charged for a visual term whose point is not in front of its camera,
/// as a normalized residual norm.
inline constexpr double kBehindCameraResidual = 1e3;

/// Total robust cost sum 0.5 rho(|r/sigma|^2).
double robust_cost(const BundleProblem& problem);

struct LmConfig {
  int max_iterations = 20;
  double initial_lambda = 1e-4;
  double lambda_increase = 10.0;
  double lambda_decrease = 0.3;
  double max_lambda = 1e12;
  double function_tolerance = 1e-12;  // relative cost decrease to stop
  double step_tolerance = 1e-12;      // step norm to stop
};

struct LmReport {
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  int accepted_steps = 0;
  bool converged = false;
  std::vector<double> cost_history;  // initial cost, then after each accepted step
};

/// Levenberg-Marquardt with IRLS weights, Schur complement on the free
/// points, and a dense reduced camera system. A step is accepted only if the
/// robust cost decreases.
LmReport solve_bundle(BundleProblem& problem, const LmConfig& cfg = {});

/// Gauss-Newton Hessian J^T W J over the free variables (cameras first, 6
/// each, then points, 3 each), IRLS weights at the current state.
Eigen::MatrixXd dense_hessian(const BundleProblem& problem);

}  // namespace priorloc
