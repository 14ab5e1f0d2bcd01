#pragma once

#include <span>
#include <utility>
#include <vector>

#include "priorloc/geometry/trajectory.hpp"

namespace priorloc {

inline constexpr double kDefaultAssociationTolerance = 0.02;

/// Nearest-timestamp pairs (est index, ref index) within `tolerance`
/// seconds; each reference entry is used at most once.
std::vector<std::pair<std::size_t, std::size_t>> associate(const Trajectory& est,
                                                           const Trajectory& ref,
                                                           double tolerance);

/// Least-squares rigid transform `A` minimizing sum |dst_i - A src_i|^2
/// (no scale). Throws Degenerate with fewer than 3 pairs or a rank-deficient
/// cross-covariance (collinear input).
Pose umeyama_se3(std::span<const Vec3> src, std::span<const Vec3> dst);

/// Associates by timestamp and aligns est positions onto ref positions.
Pose umeyama_se3(const Trajectory& est, const Trajectory& ref,
                 double tolerance = kDefaultAssociationTolerance);

struct TrajectoryMetrics {
  std::size_t pairs = 0;
  double ape_trans_mean = 0.0;   // m
  double ape_trans_rmse = 0.0;   // m
  double ape_trans_max = 0.0;    // m
  double ape_rot_mean = 0.0;     // deg
  double ape_rot_rmse = 0.0;     // deg
  double rpe_trans_mean = 0.0;   // m
  double rpe_trans_rmse = 0.0;   // m
  double rpe_rot_mean = 0.0;     // deg
  Pose alignment;                // applied to est before comparison
  std::vector<double> timestamps;       // of associated est entries
  std::vector<double> ape_trans;        // per associated pair, m
  std::vector<double> ape_rot;          // per associated pair, deg
};

/// APE/RPE after SE(3) Umeyama alignment of est onto ref. Throws
/// NoAssociations when no timestamps match.
TrajectoryMetrics ape_rpe(const Trajectory& est, const Trajectory& ref,
                          double tolerance = kDefaultAssociationTolerance);

}  // namespace priorloc
