#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "priorloc/localizer/pose_optimizer.hpp"

namespace priorloc {

/// Camera poses (sensor-to-world) consistent with three unit bearings in the
/// camera frame and their world points. Up to four solutions; empty for
/// degenerate input.
std::vector<Pose> p3p(const std::array<Vec3, 3>& bearings, const std::array<Vec3, 3>& points);

struct PnpConfig {
  double reproj_gate = 3.0;  // px
  double confidence = 0.999;
  int max_iterations = 1000;
  int min_inliers = 4;
  bool refine = true;
  std::uint64_t seed = 1;

  void validate() const;
};

struct PnpResult {
  Pose pose;
  std::vector<bool> inlier;
  std::size_t inlier_count = 0;
  int iterations = 0;
};

/// P3P hypotheses over random minimal samples with an adaptive iteration
/// count, then a robust refinement on the inliers. The input is sorted
/// internally and the RNG seed is derived from the sorted data, so the
/// result does not depend on the input order. Throws TooFewPoints with fewer
/// than 4 correspondences and RansacFailed when the best hypothesis has
/// fewer than `min_inliers` inliers.
PnpResult pnp_ransac(std::span<const Correspondence> corrs, const Intrinsics& K,
                     const PnpConfig& cfg = {});

}  // namespace priorloc
