#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "priorloc/common/error.hpp"
#include "priorloc/voxel_map/voxel_map.hpp"
#include "support/voxel_oracle.hpp"

namespace priorloc {
namespace {

VoxelMapConfig centered(double res) {
  VoxelMapConfig cfg;
  cfg.resolution = res;
  cfg.origin = Vec3::Constant(-0.5 * res);  // voxel centers on the res lattice
  return cfg;
}

TEST(VoxelMap, WorldVoxelRoundTrip) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  VoxelMapConfig cfg;
  cfg.resolution = 0.37;
  cfg.origin = Vec3(0.11, -0.3, 2.0);
  const VoxelMap map(cfg);
  for (int i = 0; i < 10000; ++i) {
    const Vec3 p(u(rng), u(rng), u(rng));
    const VoxelKey k = map.key_of(p);
    EXPECT_EQ(map.key_of(map.center_of(k)), k);
    EXPECT_LE((map.center_of(k) - p).cwiseAbs().maxCoeff(), 0.5 * cfg.resolution + 1e-12);
  }
}

TEST(VoxelMap, RejectsInvalidConfig) {
  VoxelMapConfig cfg;
  cfg.resolution = 0.0;
  EXPECT_THROW(VoxelMap{cfg}, Error);
}

TEST(VoxelMap, SinglePointIntegration) {
  VoxelMapConfig cfg;
  cfg.resolution = 0.5;
  VoxelMap map(cfg);
  const std::vector<Vec3> scan = {Vec3(5, 0, 0)};
  map.integrate_scan(scan, Pose());
  const VoxelKey end = map.key_of(Vec3(5, 0, 0));
  EXPECT_TRUE(map.occupied(end));
  int free_cells = 0;
  for (int x = 0; x < end.x; ++x) {
    const VoxelCell* c = map.find({x, 0, 0});
    if (c != nullptr && c->misses == 1 && !map.occupied({x, 0, 0})) ++free_cells;
  }
  EXPECT_EQ(free_cells, 9);
  EXPECT_EQ(map.find({0, 0, 0}), nullptr);  // sensor voxel untouched
  EXPECT_EQ(map.cell_count(), 10u);
}

TEST(VoxelMap, EmptyScanAndSaturation) {
  VoxelMap map(centered(0.2));
  map.integrate_scan({}, Pose());
  EXPECT_EQ(map.cell_count(), 0u);
  const std::vector<Vec3> scan = {Vec3(2, 1, 0)};
  for (int i = 0; i < 10; ++i) map.integrate_scan(scan, Pose());
  const VoxelCell* c = map.find(map.key_of(Vec3(2, 1, 0)));
  ASSERT_NE(c, nullptr);
  EXPECT_EQ(c->hits, 10u);
  EXPECT_DOUBLE_EQ(c->log_odds, map.config().log_odds_max);
  for (const auto& k : map.traverse(Vec3::Zero(), Vec3(2, 1, 0))) {
    const VoxelCell* f = map.find(k);
    if (f != nullptr && f->misses > 0) EXPECT_GE(f->log_odds, map.config().log_odds_min);
  }
}

TEST(VoxelMap, RangeCutoff) {
  VoxelMapConfig cfg = centered(0.2);
  cfg.max_range = 3.0;
  VoxelMap map(cfg);
  const std::vector<Vec3> scan = {Vec3(5, 0, 0)};
  map.integrate_scan(scan, Pose());
  EXPECT_EQ(map.cell_count(), 0u);
}

TEST(RayTrace, HitsVoxelOnAxis) {
  VoxelMap map(centered(0.2));
  map.update(map.key_of(Vec3(5, 0, 0)), true);
  for (bool freeze : {false, true}) {
    if (freeze) map.freeze();
    const auto hit = map.ray_trace(Vec3::Zero(), Vec3(1, 0, 0), 50.0);
    ASSERT_TRUE(hit.has_value());
    EXPECT_LE((hit->point - Vec3(5, 0, 0)).norm(), 0.5 * std::sqrt(3.0) * 0.2);
    EXPECT_NEAR(hit->distance, 4.9, 1e-9);
  }
}

TEST(RayTrace, MissCasesAndErrors) {
  VoxelMap empty(centered(0.2));
  EXPECT_FALSE(empty.ray_trace(Vec3::Zero(), Vec3(1, 0, 0), 50.0).has_value());
  VoxelMap map(centered(0.2));
  map.update(map.key_of(Vec3(5, 0, 0)), true);
  EXPECT_FALSE(map.ray_trace(Vec3::Zero(), Vec3(1, 0, 0), 4.0).has_value());
  EXPECT_FALSE(map.ray_trace(Vec3::Zero(), Vec3(-1, 0, 0), 50.0).has_value());
  try {
    map.ray_trace(Vec3(1, 1, 1), Vec3(1, 1, 1), 10.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateRay);
  }
}

TEST(RayTrace, OriginInsideOccupiedVoxel) {
  VoxelMap map(centered(0.2));
  const VoxelKey k = map.key_of(Vec3(1, 1, 1));
  map.update(k, true);
  const auto hit = map.ray_trace(Vec3(1.03, 0.98, 1.01), Vec3(5, 5, 5), 10.0);
  ASSERT_TRUE(hit.has_value());
  EXPECT_EQ(hit->key, k);
  EXPECT_DOUBLE_EQ(hit->distance, 0.0);
}

TEST(RayTrace, MatchesBruteForceOracle) {
  std::mt19937_64 rng(42);
  int hits = 0;
  for (int trial = 0; trial < 2000; ++trial) {
    auto scenario = testing_support::random_ray_scenario(rng);
    if (trial % 2 == 1) scenario.map.freeze();
    const auto dda = scenario.map.ray_trace(scenario.origin, scenario.through, scenario.max_range);
    const auto brute = testing_support::brute_force_first_hit(
        scenario.map, scenario.origin, scenario.through, scenario.max_range);
    ASSERT_EQ(dda.has_value(), brute.has_value()) << "trial " << trial;
    if (dda) {
      ++hits;
      EXPECT_EQ(dda->key, brute->key) << "trial " << trial;
      EXPECT_NEAR(dda->distance, brute->distance, 1e-9);
    }
  }
  EXPECT_GT(hits, 200);
}

TEST(VoxelMap, IntegrateThenTraceFindsEndpoints) {
  VoxelMap map(centered(0.2));
  std::vector<Vec3> scan;
  const int n = 150;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> range(2.0, 20.0);
  for (int i = 0; i < n; ++i) {  // Fibonacci sphere, well-separated beams
    const double z = 1.0 - 2.0 * (i + 0.5) / n;
    const double r = std::sqrt(1.0 - z * z);
    const double phi = i * kPi * (3.0 - std::sqrt(5.0));
    scan.push_back(range(rng) * Vec3(r * std::cos(phi), r * std::sin(phi), z));
  }
  const Pose pose = Pose::FromAxisAngle(Vec3(0.3, -1, 0.2), 0.8, Vec3(1.3, -2.1, 0.7));
  map.integrate_scan(scan, pose);
  map.freeze();
  for (const Vec3& p : scan) {
    const Vec3 w = pose * p;
    const auto hit = map.ray_trace(pose.translation(), w, map.config().max_range);
    ASSERT_TRUE(hit.has_value());
    EXPECT_EQ(hit->key, map.key_of(w));
  }
}

TEST(VoxelMap, SerializationRoundTrip) {
  std::mt19937_64 rng(5);
  auto scenario = testing_support::random_ray_scenario(rng);
  scenario.map.update({1, 2, 3}, false);
  ByteWriter w;
  scenario.map.serialize(w);
  ByteReader r(w.bytes());
  const VoxelMap back = VoxelMap::deserialize(r);
  EXPECT_TRUE(back == scenario.map);
  EXPECT_EQ(back.occupied_keys(), scenario.map.occupied_keys());
  EXPECT_EQ(r.remaining(), 0u);
}

}  // namespace
}  // namespace priorloc
