#include "priorloc/mapper/triangulation.hpp"

#include <Eigen/Cholesky>
#include <cmath>

#include "priorloc/common/error.hpp"
#include "priorloc/mapper/factors.hpp"

namespace priorloc {

Vec3 triangulate(std::span<const TriangulationObservation> obs,
                 const TriangulationConfig& cfg) {
  if (obs.size() < 2) throw Error(ErrorCode::kInsufficientParallax, "need two views");
  std::vector<Vec3> dirs;
  dirs.reserve(obs.size());
  for (const auto& o : obs) dirs.push_back(o.T_wc.rotation() * o.K.bearing(o.pixel));
  double max_angle = 0.0;
  for (std::size_t a = 0; a < dirs.size(); ++a) {
    for (std::size_t b = a + 1; b < dirs.size(); ++b) {
      max_angle = std::max(max_angle,
                           std::atan2(dirs[a].cross(dirs[b]).norm(), dirs[a].dot(dirs[b])));
    }
  }
  if (max_angle < cfg.min_parallax) {
    throw Error(ErrorCode::kInsufficientParallax, "rays are nearly parallel");
  }

  Mat3 A = Mat3::Zero();
  Vec3 b = Vec3::Zero();
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const Mat3 P = Mat3::Identity() - dirs[i] * dirs[i].transpose();
    A += P;
    b += P * obs[i].T_wc.translation();
  }
  Vec3 X = A.ldlt().solve(b);

  for (const auto& o : obs) {
    const Vec3 pc = o.T_wc.inverse() * X;
    if (!(pc.z() > kDefaultMinDepth)) {
      throw Error(ErrorCode::kCheiralityViolation, "point is not in front of every view");
    }
  }

  // Gauss-Newton on reprojection error, kept only while it improves.
  const auto cost = [&](const Vec3& p, bool& valid) {
    double c = 0.0;
    valid = true;
    for (const auto& o : obs) {
      Vec2 r;
      if (!visual_residual(o.K, o.T_wc, p, o.pixel, &r)) {
        valid = false;
        return 0.0;
      }
      c += r.squaredNorm();
    }
    return c;
  };
  bool valid = true;
  double c0 = cost(X, valid);
  for (int it = 0; it < cfg.refine_iterations; ++it) {
    Mat3 H = Mat3::Zero();
    Vec3 g = Vec3::Zero();
    for (const auto& o : obs) {
      Vec2 r;
      Mat23 J;
      visual_residual(o.K, o.T_wc, X, o.pixel, &r, nullptr, &J);
      H += J.transpose() * J;
      g += J.transpose() * r;
    }
    const Vec3 step = H.ldlt().solve(-g);
    if (!step.allFinite()) break;
    const Vec3 cand = X + step;
    const double c1 = cost(cand, valid);
    if (!valid || !(c1 < c0)) break;
    X = cand;
    c0 = c1;
  }

  for (const auto& o : obs) {
    Vec2 r;
    if (!visual_residual(o.K, o.T_wc, X, o.pixel, &r)) {
      throw Error(ErrorCode::kCheiralityViolation, "point is not in front of every view");
    }
    if (r.norm() > cfg.max_reprojection) {
      throw Error(ErrorCode::kLargeReprojection, "reprojection error above the gate");
    }
  }
  return X;
}

}  // namespace priorloc
