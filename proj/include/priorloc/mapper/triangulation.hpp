#pragma once

#include <span>

#include "priorloc/geometry/camera.hpp"

namespace priorloc {

struct TriangulationObservation {
  Pose T_wc;
  Intrinsics K;
  Vec2 pixel;
};

struct TriangulationConfig {
  double min_parallax = 1.0 * kDegToRad;  // rad, largest pairwise ray angle
  double max_reprojection = 4.0;          // px, in every view
  int refine_iterations = 5;
};

/// Least-squares ray intersection refined on reprojection error.
/// Throws InsufficientParallax (fewer than 2 views or rays closer than
/// min_parallax), CheiralityViolation (non-positive depth in a view), or
/// LargeReprojection.
Vec3 triangulate(std::span<const TriangulationObservation> obs,
                 const TriangulationConfig& cfg = {});

}  // namespace priorloc
