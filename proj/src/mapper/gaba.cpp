#include "priorloc/mapper/gaba.hpp"

#include <algorithm>
#include <limits>
#include <map>

#include "priorloc/common/error.hpp"

namespace priorloc {

void GabaConfig::validate() const {
  if (!(huber_visual > 0) || !(huber_struct > 0) || !(huber_prior > 0) || !(sigma_visual > 0) ||
      !(sigma_struct > 0) || !(sigma_prior_t > 0) || !(sigma_prior_r > 0) || rounds < 1 ||
      inner_iters < 1 || !(struct_gate > 0) || !(outlier_sigma > 0)) {
    throw Error(ErrorCode::kConfig, "invalid GABA configuration");
  }
}

namespace {

// Trilinear interpolation of the occupied indicator between voxel centers.
double occupancy_field(const VoxelMap& voxels, const Vec3& x) {
  const auto& c = voxels.config();
  const Vec3 g = (x - c.origin) / c.resolution - Vec3::Constant(0.5);
  const Vec3 f0 = g.array().floor();
  const Vec3 w = g - f0;
  const int ix = static_cast<int>(f0.x()), iy = static_cast<int>(f0.y()),
            iz = static_cast<int>(f0.z());
  double sum = 0.0;
  for (int dx = 0; dx < 2; ++dx) {
    for (int dy = 0; dy < 2; ++dy) {
      for (int dz = 0; dz < 2; ++dz) {
        if (!voxels.occupied(VoxelKey{ix + dx, iy + dy, iz + dz})) continue;
        sum += (dx ? w.x() : 1 - w.x()) * (dy ? w.y() : 1 - w.y()) * (dz ? w.z() : 1 - w.z());
      }
    }
  }
  return sum;
}

// First local maximum of the interpolated occupancy along the ray near the
// hit voxel. A one-voxel layer centered on a surface gives a tent whose
// apex is the surface crossing.
std::optional<Vec3> surface_peak(const VoxelMap& voxels, const RayHit& hit, const Vec3& origin,
                                 const Vec3& dir) {
  const double res = voxels.config().resolution;
  const double h = res / 16.0;
  const double t_end = hit.distance + 10.0 * res;
  double t = std::max(0.0, hit.distance - res);
  double prev = occupancy_field(voxels, origin + t * dir);
  while (true) {
    const double tn = t + h;
    if (tn > t_end) return std::nullopt;
    const double fn = occupancy_field(voxels, origin + tn * dir);
    if (prev >= 0.5 && fn < prev) break;
    prev = fn;
    t = tn;
  }
  double a = std::max(0.0, t - h), b = t + h;
  for (int i = 0; i < 200 && b - a > 1e-14 * std::max(1.0, b); ++i) {
    const double m1 = a + (b - a) / 3.0, m2 = b - (b - a) / 3.0;
    if (occupancy_field(voxels, origin + m1 * dir) < occupancy_field(voxels, origin + m2 * dir)) {
      a = m1;
    } else {
      b = m2;
    }
  }
  return origin + 0.5 * (a + b) * dir;
}

}  // namespace

std::optional<Vec3> structure_target(const VoxelMap& voxels, const Vec3& eye, const Vec3& p,
                                     double min_ray_length, double gate, bool refine_surface) {
  const Vec3 d = p - eye;
  const double len = d.norm();
  if (len <= min_ray_length + 1e-9) return std::nullopt;
  const Vec3 start = eye + d * (min_ray_length / len);
  const auto hit =
      voxels.ray_trace(start, p, len - min_ray_length + gate + voxels.config().resolution);
  if (!hit) return std::nullopt;
  Vec3 target = hit->point;
  if (refine_surface) {
    if (const auto q = surface_peak(voxels, *hit, start, d / len)) target = *q;
  }
  if ((target - p).norm() > gate) return std::nullopt;
  return target;
}

namespace {

struct Assembly {
  BundleProblem problem;
  std::vector<PointId> point_ids;          // problem point index -> map id
  std::map<PointId, std::size_t> point_index;
  // Visual term -> observation it came from.
  std::vector<Observation> term_obs;
};

Assembly assemble(const VisualMap& map, const GabaConfig& cfg, const GabaWindow* window) {
  Assembly a;
  BundleProblem& pb = a.problem;
  pb.K = map.intrinsics();
  for (const auto& kf : map.keyframes()) {
    const bool free = !window || window->free_keyframes.count(kf.id) > 0;
    pb.add_pose(kf.pose, !free);
  }
  std::vector<bool> pose_used(map.keyframe_count(), false);
  for (const auto& [id, mp] : map.points()) {
    bool include = !window;
    if (window) {
      for (const auto& o : mp.observers) {
        if (window->free_keyframes.count(o.keyframe)) {
          include = true;
          break;
        }
      }
    }
    if (!include) continue;
    const std::size_t j = pb.add_point(mp.position);
    a.point_ids.push_back(id);
    a.point_index[id] = j;
    for (const auto& o : mp.observers) {
      const Keyframe& kf = map.keyframe(o.keyframe);
      pb.visual.push_back(
          {o.keyframe, j, kf.features.keypoints[o.keypoint], cfg.sigma_visual,
           Huber{cfg.huber_visual / cfg.sigma_visual}});
      a.term_obs.push_back(o);
      pose_used[o.keyframe] = true;
    }
  }
  if (cfg.use_prior) {
    for (const auto& kf : map.keyframes()) {
      if (pb.pose_fixed[kf.id]) continue;
      pb.priors.push_back({kf.id, kf.prior_pose, cfg.sigma_prior_t, cfg.sigma_prior_r,
                           Huber{cfg.huber_prior}});
    }
  }
  // Keyframes that contribute nothing stay fixed so the system is not singular.
  for (std::size_t i = 0; i < pose_used.size(); ++i) {
    if (!pose_used[i] && !cfg.use_prior) pb.pose_fixed[i] = true;
  }
  return a;
}

// Observer whose reprojection residual is smallest at the current state;
// residuals within kAnchorTie px count as equal and the earlier observer wins.
constexpr double kAnchorTie = 1e-6;

KeyframeId best_anchor(const BundleProblem& pb, const VisualMap& map, const MapPoint& mp,
                       std::size_t j) {
  KeyframeId best = mp.observers.front().keyframe;
  double best_r = std::numeric_limits<double>::infinity();
  for (const auto& o : mp.observers) {
    Vec2 r;
    const auto& kf = map.keyframe(o.keyframe);
    if (!visual_residual(pb.K, pb.poses[o.keyframe], pb.points[j], kf.features.keypoints[o.keypoint],
                         &r)) {
      continue;
    }
    if (r.norm() < best_r - kAnchorTie) {
      best_r = r.norm();
      best = o.keyframe;
    }
  }
  return best;
}

}  // namespace

BundleProblem make_bundle_problem(const VisualMap& map, const GabaConfig& cfg) {
  return assemble(map, cfg, nullptr).problem;
}

GabaReport gaba(VisualMap& map, const VoxelMap* voxels, const GabaConfig& cfg,
                const GabaWindow* window) {
  cfg.validate();
  const bool structure = cfg.use_structure && voxels != nullptr;
  if (cfg.use_structure && !voxels) {
    throw Error(ErrorCode::kConfig, "structure factor enabled without a voxel map");
  }
  Assembly a = assemble(map, cfg, window);
  BundleProblem& pb = a.problem;
  GabaReport report;
  if (pb.points.empty()) return report;

  double min_ray = cfg.min_ray_length;
  double sigma_struct = cfg.sigma_struct;
  if (structure) {
    if (min_ray <= 0.0) min_ray = 2.0 * voxels->config().resolution;
    sigma_struct = std::max(sigma_struct, 0.5 * voxels->config().resolution);
  }

  LmConfig lm;
  lm.max_iterations = cfg.inner_iters;
  if (cfg.warm_start && structure) {
    report.warm_start_costs = solve_bundle(pb, lm).cost_history;
  }
  double previous_end = std::numeric_limits<double>::quiet_NaN();
  for (int round = 0; round < cfg.rounds; ++round) {
    pb.structure.clear();
    if (structure) {
      for (std::size_t j = 0; j < pb.points.size(); ++j) {
        const MapPoint& mp = map.point(a.point_ids[j]);
        std::vector<KeyframeId> eyes;
        if (cfg.per_pair_structure) {
          for (const auto& o : mp.observers) eyes.push_back(o.keyframe);
        } else {
          eyes.push_back(round == 0 ? mp.observers.front().keyframe
                                    : best_anchor(pb, map, mp, j));
        }
        for (KeyframeId e : eyes) {
          const auto target =
              structure_target(*voxels, pb.poses[e].translation(), pb.points[j], min_ray,
                               cfg.struct_gate, cfg.refine_surface);
          if (!target) continue;
          pb.structure.push_back(
              {j, *target, sigma_struct, Huber{cfg.huber_struct / sigma_struct}});
        }
      }
    }
    GabaRound r;
    r.associations = pb.structure.size();
    const LmReport rep = solve_bundle(pb, lm);
    r.cost_start = rep.initial_cost;
    r.cost_end = rep.final_cost;
    r.lm_iterations = rep.iterations;
    r.lm_costs = rep.cost_history;
    if (!std::isnan(previous_end) &&
        r.cost_start > previous_end * (1.0 + cfg.cost_tolerance) + 1e-12) {
      report.non_decreasing_cost = true;
    }
    previous_end = r.cost_end;
    report.rounds.push_back(std::move(r));
  }

  for (const auto& kf : map.keyframes()) {
    if (!pb.pose_fixed[kf.id]) map.keyframe(kf.id).pose = pb.poses[kf.id];
  }
  for (std::size_t j = 0; j < pb.points.size(); ++j) {
    map.point(a.point_ids[j]).position = pb.points[j];
  }

  if (cfg.cull_outliers) {
    const double gate = cfg.outlier_sigma * cfg.sigma_visual;
    std::set<PointId> touched;
    for (std::size_t t = 0; t < pb.visual.size(); ++t) {
      const auto& v = pb.visual[t];
      Vec2 res;
      const bool ok = visual_residual(pb.K, pb.poses[v.camera], pb.points[v.point], v.measurement, &res);
      if (ok && res.norm() <= gate) continue;
      map.remove_observation(a.point_ids[v.point], a.term_obs[t]);
      touched.insert(a.point_ids[v.point]);
      ++report.detached_observations;
    }
    for (PointId id : touched) {
      if (map.point(id).observers.size() < 2) {
        map.remove_point(id);
        ++report.culled_points;
      } else {
        map.refresh_descriptor(id);
      }
    }
  }
  return report;
}

}  // namespace priorloc
