#include "priorloc/registration/prior_generation.hpp"

#include <algorithm>
#include <iostream>
#include <limits>

#include "priorloc/common/error.hpp"

namespace priorloc {

void PriorGenerationConfig::validate() const {
  gicp.validate();
  if (covariance_neighbors < 4 || !(covariance_epsilon > 0.0) || scan_leaf_size < 0.0 ||
      !(max_scan_cost > 0.0) || max_failed_scans < 1 || !initial_pose.is_finite()) {
    throw Error(ErrorCode::kConfig, "invalid prior generation configuration");
  }
}

Pose camera_prior_at(const Trajectory& lidar_traj, double t, const Extrinsics& ext) {
  if (lidar_traj.empty() || t < lidar_traj.front().timestamp ||
      t > lidar_traj.back().timestamp) {
    throw Error(ErrorCode::kOutOfRange, "time outside the LiDAR trajectory span");
  }
  const auto it = std::lower_bound(
      lidar_traj.begin(), lidar_traj.end(), t,
      [](const StampedPose& sp, double v) { return sp.timestamp < v; });
  const Pose T_cl_inv = ext.T_cl.inverse();
  if (it->timestamp == t) return it->pose * T_cl_inv;
  const auto& left = *(it - 1);
  return interpolate_pose(left.pose, it->pose, left.timestamp, it->timestamp, t) *
         T_cl_inv;
}

PriorGenerationResult generate_priors(const std::vector<LidarScan>& scans,
                                      const CovCloud& ref_map,
                                      const std::vector<double>& image_times,
                                      const Extrinsics& ext,
                                      const PriorGenerationConfig& cfg) {
  cfg.validate();
  if (ref_map.empty()) throw Error(ErrorCode::kTooFewPoints, "reference map is empty");
  PriorGenerationResult out;

  CovCloud prev_cloud;
  Pose prev_pose = cfg.initial_pose;
  Pose prev_delta;  // constant-velocity seed for scan-to-scan
  int failed = 0;
  for (std::size_t k = 0; k < scans.size(); ++k) {
    const auto pts = voxel_downsample(scans[k].points, cfg.scan_leaf_size);
    const CovCloud cloud =
        compute_covariances(pts, cfg.covariance_neighbors, cfg.covariance_epsilon);

    Pose seed = prev_pose;
    if (k > 0) {
      Pose delta = prev_delta;
      try {
        delta = gicp(cloud, prev_cloud, prev_delta, cfg.gicp).pose;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kNoCorrespondences) throw;
      }
      seed = prev_pose * delta;
    }

    Pose pose = seed;
    double cost = std::numeric_limits<double>::infinity();
    try {
      const GicpResult r = gicp(cloud, ref_map, seed, cfg.gicp);
      pose = r.pose;
      cost = r.final_cost;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNoCorrespondences) throw;
    }
    out.scan_costs.push_back(cost);
    failed = cost > cfg.max_scan_cost ? failed + 1 : 0;
    if (failed >= cfg.max_failed_scans) {
      throw Error(ErrorCode::kTrackingLost,
                  "scan-to-map registration failed on consecutive scans ending at t=" +
                      std::to_string(scans[k].timestamp));
    }

    out.lidar_traj.push_back(scans[k].timestamp, pose);
    if (k > 0) prev_delta = prev_pose.inverse() * pose;
    prev_pose = pose;
    prev_cloud = cloud;
  }

  for (double t : image_times) {
    if (out.lidar_traj.empty() || t < out.lidar_traj.front().timestamp ||
        t > out.lidar_traj.back().timestamp) {
      out.dropped_image_times.push_back(t);
      continue;
    }
    out.cam_priors.push_back(t, camera_prior_at(out.lidar_traj, t, ext));
  }
  if (!out.dropped_image_times.empty()) {
    std::clog << "warning: dropped " << out.dropped_image_times.size()
              << " image time(s) outside the LiDAR span\n";
  }
  return out;
}

}  // namespace priorloc
