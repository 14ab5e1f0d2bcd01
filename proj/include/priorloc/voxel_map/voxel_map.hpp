#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "priorloc/common/binary_io.hpp"
#include "priorloc/geometry/pose.hpp"

namespace priorloc {

struct VoxelKey {
  std::int32_t x = 0;
  std::int32_t y = 0;
  std::int32_t z = 0;

  auto operator<=>(const VoxelKey&) const = default;
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const noexcept {
    std::uint64_t h = static_cast<std::uint32_t>(k.x) * 0x9E3779B185EBCA87ULL;
    h ^= static_cast<std::uint32_t>(k.y) * 0xC2B2AE3D27D4EB4FULL + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint32_t>(k.z) * 0x165667B19E3779F9ULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

struct VoxelCell {
  std::uint32_t hits = 0;
  std::uint32_t misses = 0;
  double log_odds = 0.0;

  bool operator==(const VoxelCell&) const = default;
};

struct VoxelMapConfig {
  double resolution = 0.2;            // m per voxel edge
  Vec3 origin = Vec3::Zero();         // world position of voxel (0,0,0)'s min corner
  double hit_increment = 0.85;
  double miss_increment = -0.4;
  double log_odds_min = -2.0;
  double log_odds_max = 3.5;
  double occupancy_threshold = 0.0;   // occupied iff log-odds > threshold
  double max_range = 30.0;            // integration range cutoff, m

  void validate() const;
  bool operator==(const VoxelMapConfig&) const = default;
};

struct RayHit {
  VoxelKey key;
  Vec3 point;       // center of the hit voxel
  double distance;  // ray parameter (m) at which the voxel is entered
};

/// Flat-hashed occupancy grid. Single writer while integrating; call
/// freeze() once construction is done, after which the map is read-only and
/// safe to trace from many threads.
class VoxelMap {
 public:
  explicit VoxelMap(VoxelMapConfig config = {});

  const VoxelMapConfig& config() const { return config_; }

  VoxelKey key_of(const Vec3& p) const;
  Vec3 center_of(const VoxelKey& key) const;

  /// Hit update at each endpoint voxel, miss update along each beam; the
  /// sensor's own voxel and endpoint voxels are never cleared. Each voxel
  /// receives at most one update per scan.
  void integrate_scan(std::span<const Vec3> scan_sensor_frame, const Pose& sensor_pose);

  /// Direct occupancy update of a single voxel.
  void update(const VoxelKey& key, bool hit);

  bool occupied(const VoxelKey& key) const;
  const VoxelCell* find(const VoxelKey& key) const;
  std::size_t cell_count() const { return cells_.size(); }
  std::size_t occupied_count() const;
  /// Sorted occupied keys.
  std::vector<VoxelKey> occupied_keys() const;

  void freeze();
  bool frozen() const { return frozen_; }

  /// First occupied voxel along the ray from `origin` through `through`,
  /// entered within `max_range`. A ray starting inside an occupied voxel hits
  /// it immediately. Throws DegenerateRay when the direction is ~zero.
  std::optional<RayHit> ray_trace(const Vec3& origin, const Vec3& through,
                                  double max_range) const;

  /// Voxels pierced by the segment [from, to], in traversal order.
  std::vector<VoxelKey> traverse(const Vec3& from, const Vec3& to) const;

  void serialize(ByteWriter& out) const;
  static VoxelMap deserialize(ByteReader& in);

  /// ASCII PLY of occupied voxel centers.
  void export_ply(const std::string& path) const;

  bool operator==(const VoxelMap& other) const;

 private:
  void apply(VoxelCell& cell, bool hit) const;

  VoxelMapConfig config_;
  std::unordered_map<VoxelKey, VoxelCell, VoxelKeyHash> cells_;
  bool frozen_ = false;
  // occupied bounds, valid when frozen_
  Vec3 bounds_min_ = Vec3::Zero();
  Vec3 bounds_max_ = Vec3::Zero();
  bool any_occupied_ = false;
};

}  // namespace priorloc
