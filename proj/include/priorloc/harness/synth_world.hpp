#pragma once

#include <optional>
#include <vector>

#include "priorloc/features/synthetic_oracle.hpp"
#include "priorloc/geometry/trajectory.hpp"
#include "priorloc/registration/prior_generation.hpp"
#include "priorloc/voxel_map/voxel_map.hpp"

namespace priorloc {

struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();
};

struct SurfaceHit {
  double distance;
  Vec3 normal;  // facing the ray origin
};

/// Closed box seen from inside plus solid box obstacles.
struct SynthScene {
  Aabb room;
  std::vector<Aabb> pillars;

  /// First surface along the unit direction `dir` within `max_range`.
  std::optional<SurfaceHit> cast(const Vec3& origin, const Vec3& dir, double max_range) const;
  /// `p` is the first surface point seen from `eye` and the viewing angle to
  /// its surface normal is at most `max_incidence`.
  bool visible(const Vec3& eye, const Vec3& p, double max_incidence) const;
};

struct SynthConfig {
  SynthScene scene{{Vec3(-20, -3, 0), Vec3(20, 3, 4)},
                   {{Vec3(-10.4, -0.4, 0), Vec3(-9.6, 0.4, 4)},
                    {Vec3(-5.4, -0.4, 0), Vec3(-4.6, 0.4, 4)},
                    {Vec3(-0.4, -0.4, 0), Vec3(0.4, 0.4, 4)},
                    {Vec3(4.6, -0.4, 0), Vec3(5.4, 0.4, 4)},
                    {Vec3(9.6, -0.4, 0), Vec3(10.4, 0.4, 4)}}};
  std::size_t landmarks = 2000;
  int descriptor_dim = 128;
  /// Landmarks sit on voxel centers of this grid.
  VoxelMapConfig voxels{0.2, Vec3(0.1, 0.1, 0.1)};

  std::size_t frames = 300;
  double frame_rate = 10.0;  // Hz
  double loop_radius_x = 15.0;
  double loop_radius_y = 1.8;
  double camera_height = 1.5;
  Intrinsics camera{400.0, 400.0, 320.0, 240.0, 640, 480};
  double max_incidence = 75.0 * kDegToRad;
  double max_range = 30.0;

  // LiDAR: x forward, y left, z up; T_cl maps LiDAR to camera coordinates.
  Extrinsics extrinsics;
  int lidar_beams = 32;
  double lidar_vertical_fov = 30.0 * kDegToRad;
  double lidar_azimuth_step = 1.0 * kDegToRad;
  double lidar_max_range = 50.0;
  std::size_t lidar_every = 2;  // one scan every this many frames
  double reference_spacing = 0.1;  // m, grid of the reference cloud

  double pixel_sigma = 0.5;
  double descriptor_sigma = 0.02;
  double range_sigma = 0.01;
  double prior_sigma_t = 0.1;
  double prior_sigma_r = 1.0 * kDegToRad;
  std::uint64_t seed = 1;

  SynthConfig();
  void validate() const;
};

struct SynthWorld {
  SynthConfig cfg;
  std::vector<Landmark> landmarks;
  Trajectory gt;      // camera-to-world per frame
  Trajectory priors;  // gt with injected prior noise

  OracleConfig oracle_config() const;
  SyntheticOracle oracle() const;
  /// Frames at which a LiDAR scan is taken.
  std::vector<std::size_t> scan_frames() const;
  LidarScan render_scan(std::size_t frame) const;
  std::vector<LidarScan> scans() const;
  Trajectory lidar_gt() const;
  /// Grid samples of every surface, world frame.
  std::vector<Vec3> reference_cloud() const;
  /// Voxels of cfg.voxels pierced by the surfaces, frozen.
  VoxelMap surface_voxels() const;
  std::vector<double> frame_times() const;
};

/// Deterministic in the configuration (including its seed).
SynthWorld synth_generate(const SynthConfig& cfg);

}  // namespace priorloc
