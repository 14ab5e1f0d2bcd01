#include "priorloc/geometry/camera.hpp"

#include "priorloc/common/error.hpp"

namespace priorloc {

void Intrinsics::validate() const {
  if (!(fx > 0.0 && fy > 0.0)) {
    throw Error(ErrorCode::kConfig, "focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) {
    throw Error(ErrorCode::kConfig, "image size must be positive");
  }
  if (!(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height)) {
    throw Error(ErrorCode::kConfig, "principal point outside the image");
  }
}

Mat3 Intrinsics::matrix() const {
  Mat3 K;
  K << fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0;
  return K;
}

bool Intrinsics::in_image(const Vec2& px, double border) const {
  return px.x() >= border && px.y() >= border && px.x() <= width - 1 - border &&
         px.y() <= height - 1 - border;
}

Vec3 Intrinsics::unproject(const Vec2& px, double depth) const {
  return Vec3((px.x() - cx) / fx * depth, (px.y() - cy) / fy * depth, depth);
}

Vec3 Intrinsics::bearing(const Vec2& px) const { return unproject(px, 1.0).normalized(); }

std::optional<Vec2> try_project(const Intrinsics& K, const Pose& T_wc,
                                const Vec3& p_world, double z_min) {
  const Vec3 pc = T_wc.rotation().conjugate() * (p_world - T_wc.translation());
  if (!(pc.z() > z_min)) return std::nullopt;
  return Vec2(K.fx * pc.x() / pc.z() + K.cx, K.fy * pc.y() / pc.z() + K.cy);
}

Vec2 project(const Intrinsics& K, const Pose& T_wc, const Vec3& p_world, double z_min) {
  auto px = try_project(K, T_wc, p_world, z_min);
  if (!px) throw Error(ErrorCode::kBehindCamera, "point is behind the camera");
  return *px;
}

}  // namespace priorloc
