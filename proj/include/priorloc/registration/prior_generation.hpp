#pragma once

#include <string>
#include <vector>

#include "priorloc/geometry/trajectory.hpp"
#include "priorloc/registration/gicp.hpp"

namespace priorloc {

struct Extrinsics {
  Pose T_cl;  // camera-from-LiDAR
};

struct LidarScan {
  double timestamp = 0.0;
  std::vector<Vec3> points;  // LiDAR frame
};

struct PriorGenerationConfig {
  GicpConfig gicp;
  int covariance_neighbors = 20;
  double covariance_epsilon = 1e-3;
  double scan_leaf_size = 0.25;  // m
  /// Scan-to-map mean Mahalanobis cost above which a scan counts as failed.
  double max_scan_cost = 10.0;
  /// Consecutive failed scans that abort generation with TrackingLost.
  int max_failed_scans = 3;
  /// LiDAR pose of the first scan, used to seed its scan-to-map step.
  Pose initial_pose;

  void validate() const;
};

struct PriorGenerationResult {
  Trajectory lidar_traj;  // LiDAR-to-world per scan
  Trajectory cam_priors;  // camera-to-world per kept image time
  std::vector<double> scan_costs;
  std::vector<double> dropped_image_times;  // outside the scan time span
};

/// Camera prior at `t` from the LiDAR trajectory: interpolated LiDAR pose
/// composed with the inverse extrinsics. Throws OutOfRange outside the span.
Pose camera_prior_at(const Trajectory& lidar_traj, double t, const Extrinsics& ext);

/// Two-stage registration per scan (scan-to-scan seeding scan-to-map), then
/// camera priors interpolated at `image_times`.
PriorGenerationResult generate_priors(const std::vector<LidarScan>& scans,
                                      const CovCloud& ref_map,
                                      const std::vector<double>& image_times,
                                      const Extrinsics& ext,
                                      const PriorGenerationConfig& cfg = {});

}  // namespace priorloc
