#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "priorloc/mapper/visual_map.hpp"
#include "priorloc/voxel_map/voxel_map.hpp"

namespace priorloc {

// Prior-map container, little-endian:
//   header   "PLMP" magic, u32 version
//   sections u32 tag, u64 payload length, payload, u64 FNV-1a of payload
// in the fixed order intrinsics, keyframes, points, covisibility,
// global index, voxel map. All reals are stored as f64.
inline constexpr std::uint32_t kMapFormatVersion = 1;

struct PriorMap {
  PriorMap() = default;
  VisualMap visual;
  VoxelMap voxels;
};

std::vector<std::uint8_t> serialize_map(const VisualMap& map, const VoxelMap& voxels);
/// Throws Corrupt on a bad magic, checksum, or truncation and
/// VersionMismatch on any version other than kMapFormatVersion.
PriorMap deserialize_map(std::span<const std::uint8_t> bytes);

void save_map(const std::string& path, const VisualMap& map, const VoxelMap& voxels);
PriorMap load_map(const std::string& path);

/// Content hash of the serialized form.
std::uint64_t map_hash(const VisualMap& map, const VoxelMap& voxels);

}  // namespace priorloc
