#include "priorloc/localizer/local_map_matching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "priorloc/common/error.hpp"

namespace priorloc {

namespace {

/// Uniform bucket grid over keypoint pixels.
class KeypointGrid {
 public:
  KeypointGrid(const std::vector<Vec2>& pts, double cell) : cell_(cell) {
    for (std::size_t i = 0; i < pts.size(); ++i) cells_[key(pts[i])].push_back(i);
  }

  template <typename F>
  void for_each_near(const Vec2& p, double radius, F&& f) const {
    const auto lo = cell_of(p - Vec2::Constant(radius));
    const auto hi = cell_of(p + Vec2::Constant(radius));
    for (std::int64_t cy = lo.second; cy <= hi.second; ++cy) {
      for (std::int64_t cx = lo.first; cx <= hi.first; ++cx) {
        const auto it = cells_.find(pack(cx, cy));
        if (it == cells_.end()) continue;
        for (std::size_t i : it->second) f(i);
      }
    }
  }

 private:
  std::pair<std::int64_t, std::int64_t> cell_of(const Vec2& p) const {
    return {static_cast<std::int64_t>(std::floor(p.x() / cell_)),
            static_cast<std::int64_t>(std::floor(p.y() / cell_))};
  }
  static std::uint64_t pack(std::int64_t x, std::int64_t y) {
    return (static_cast<std::uint64_t>(x) << 32) ^ (static_cast<std::uint64_t>(y) & 0xffffffffULL);
  }
  std::uint64_t key(const Vec2& p) const {
    const auto c = cell_of(p);
    return pack(c.first, c.second);
  }

  double cell_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> cells_;
};

}  // namespace

std::vector<Association> local_map_match(const std::vector<LocalMapPoint>& local_map,
                                         const LocalFeatures& feats, const Pose& Tbar,
                                         const Intrinsics& K, double radius,
                                         const MapMatchConfig& cfg,
                                         const std::vector<bool>* skip_keypoints,
                                         const std::vector<bool>* skip_points) {
  if (!(radius > 0.0)) throw Error(ErrorCode::kConfig, "map matching radius must be positive");
  if (!Tbar.is_finite()) throw Error(ErrorCode::kConfig, "map matching pose is not finite");
  if (feats.size() == 0 || local_map.empty()) return {};
  if (feats.dim() != local_map.front().descriptor.size()) {
    throw Error(ErrorCode::kDimMismatch, "map matching: descriptor sizes differ");
  }
  const KeypointGrid grid(feats.keypoints, std::max(radius, 1.0));
  const double r2 = radius * radius;
  // Best claim per keypoint.
  struct Claim {
    double distance;
    PointId point;
  };
  std::vector<Claim> claim(feats.size(), {std::numeric_limits<double>::infinity(), 0});
  for (std::size_t m = 0; m < local_map.size(); ++m) {
    if (skip_points && (*skip_points)[m]) continue;
    const LocalMapPoint& lp = local_map[m];
    const auto px = try_project(K, Tbar, lp.position);
    if (!px || !K.in_image(*px, cfg.border)) continue;
    double best = cfg.desc_gate;
    std::size_t best_kp = feats.size();
    grid.for_each_near(*px, radius, [&](std::size_t i) {
      if (skip_keypoints && (*skip_keypoints)[i]) return;
      if ((feats.keypoints[i] - *px).squaredNorm() > r2) return;
      const double d = descriptor_distance(feats.descriptors.row(i).transpose(), lp.descriptor);
      if (d < best || (d == best && best_kp < feats.size() && i < best_kp)) {
        best = d;
        best_kp = i;
      }
    });
    if (best_kp == feats.size() || !(best < cfg.desc_gate)) continue;
    Claim& c = claim[best_kp];
    if (best < c.distance || (best == c.distance && lp.id < c.point)) c = {best, lp.id};
  }
  std::vector<Association> out;
  for (std::size_t i = 0; i < feats.size(); ++i) {
    if (std::isfinite(claim[i].distance)) out.push_back({i, claim[i].point, claim[i].distance});
  }
  return out;
}

}  // namespace priorloc
