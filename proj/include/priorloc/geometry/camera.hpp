#pragma once

#include <optional>

#include "priorloc/geometry/pose.hpp"

namespace priorloc {

/// Pinhole intrinsics in pixels.
struct Intrinsics {
  double fx = 500.0;
  double fy = 500.0;
  double cx = 320.0;
  double cy = 240.0;
  int width = 640;
  int height = 480;

  /// Throws ConfigError unless fx, fy > 0 and the principal point lies inside
  /// the image.
  void validate() const;

  Mat3 matrix() const;
  bool in_image(const Vec2& px, double border = 0.0) const;
  /// Camera-frame point at depth `depth` along the ray through `px`.
  Vec3 unproject(const Vec2& px, double depth) const;
  /// Unit bearing through `px` in the camera frame.
  Vec3 bearing(const Vec2& px) const;

  bool operator==(const Intrinsics&) const = default;
};

inline constexpr double kDefaultMinDepth = 1e-3;

/// Pinhole projection of the world point `p_world` seen by a camera with
/// sensor-to-world pose `T_wc`. Throws BehindCamera when the camera-frame
/// depth is at or below `z_min`.
Vec2 project(const Intrinsics& K, const Pose& T_wc, const Vec3& p_world,
             double z_min = kDefaultMinDepth);

/// Non-throwing variant for inner loops.
std::optional<Vec2> try_project(const Intrinsics& K, const Pose& T_wc,
                                const Vec3& p_world, double z_min = kDefaultMinDepth);

}  // namespace priorloc
