#pragma once

// Test-only exhaustive ray/voxel intersection, independent of the DDA walk.

#include <algorithm>
#include <limits>
#include <optional>
#include <random>

#include "priorloc/voxel_map/voxel_map.hpp"

namespace priorloc::testing_support {

struct BruteHit {
  VoxelKey key;
  double distance;
};

inline std::optional<BruteHit> brute_force_first_hit(const VoxelMap& map, const Vec3& origin,
                                                     const Vec3& through, double max_range) {
  const Vec3 dir = (through - origin).normalized();
  const double res = map.config().resolution;
  std::optional<BruteHit> best;
  for (const VoxelKey& k : map.occupied_keys()) {
    const Vec3 lo = map.config().origin + res * Vec3(k.x, k.y, k.z);
    const Vec3 hi = lo + Vec3::Constant(res);
    double t0 = -std::numeric_limits<double>::infinity();
    double t1 = std::numeric_limits<double>::infinity();
    bool ok = true;
    for (int a = 0; a < 3 && ok; ++a) {
      if (dir[a] == 0.0) {
        ok = origin[a] >= lo[a] && origin[a] < hi[a];
        continue;
      }
      double ta = (lo[a] - origin[a]) / dir[a];
      double tb = (hi[a] - origin[a]) / dir[a];
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
    }
    if (!ok || t0 > t1 || t1 < 0.0) continue;
    const double entry = std::max(t0, 0.0);
    if (entry > max_range) continue;
    if (!best || entry < best->distance) best = BruteHit{k, entry};
  }
  return best;
}

struct RayScenario {
  VoxelMap map;
  Vec3 origin;
  Vec3 through;
  double max_range;
};

// Up to 500 occupied voxels in a 4 m cube around the origin, random rays.
inline RayScenario random_ray_scenario(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> res_d(0.1, 0.5);
  std::uniform_int_distribution<int> count_d(1, 500);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  VoxelMapConfig cfg;
  cfg.resolution = res_d(rng);
  cfg.origin = Vec3(u(rng), u(rng), u(rng));
  VoxelMap map(cfg);
  const int extent = static_cast<int>(std::ceil(2.0 / cfg.resolution));
  std::uniform_int_distribution<int> key_d(-extent, extent);
  const int n = count_d(rng);
  for (int i = 0; i < n; ++i) map.update({key_d(rng), key_d(rng), key_d(rng)}, true);
  const Vec3 origin = 3.0 * Vec3(u(rng), u(rng), u(rng));
  Vec3 through = 2.0 * Vec3(u(rng), u(rng), u(rng));
  if ((through - origin).norm() < 1e-3) through += Vec3(0.5, 0.0, 0.0);
  return RayScenario{std::move(map), origin, through, 1.0 + 9.0 * std::abs(u(rng))};
}

}  // namespace priorloc::testing_support
