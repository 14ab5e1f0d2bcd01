#pragma once

#include <random>
#include <vector>

#include "priorloc/geometry/pose.hpp"

namespace priorloc::testing {

/// Three orthogonal 2 m planes meeting at the origin.
inline std::vector<Vec3> corner_scene(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  std::vector<Vec3> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = u(rng), b = u(rng);
    switch (i % 3) {
      case 0: pts.emplace_back(0.0, a, b); break;
      case 1: pts.emplace_back(a, 0.0, b); break;
      default: pts.emplace_back(a, b, 0.0); break;
    }
  }
  return pts;
}

inline Pose random_pose(std::mt19937_64& rng, double max_angle, double max_trans) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const Vec3 axis(n(rng), n(rng), n(rng));
  const Vec3 dir = Vec3(n(rng), n(rng), n(rng)).normalized();
  return Pose::FromAxisAngle(axis, max_angle * u(rng), dir * max_trans * u(rng));
}

/// Pose whose rotation differs from `base` by exactly `angle` rad and whose
/// translation differs by exactly `dist` m.
inline Pose perturb(const Pose& base, std::mt19937_64& rng, double dist, double angle) {
  std::normal_distribution<double> n(0.0, 1.0);
  const Vec3 axis = Vec3(n(rng), n(rng), n(rng)).normalized();
  const Vec3 dir = Vec3(n(rng), n(rng), n(rng)).normalized();
  const Quat dq(Eigen::AngleAxisd(angle, axis));
  return Pose(dq * base.rotation(), base.translation() + dist * dir);
}

}  // namespace priorloc::testing
