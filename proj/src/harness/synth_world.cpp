#include "priorloc/harness/synth_world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "priorloc/common/error.hpp"
#include "priorloc/common/random.hpp"

namespace priorloc {
namespace {

// Axis-aligned rectangle on a box face: normal axis, fixed value, outward
// sign as seen from the free space next to it.
struct Face {
  int axis;
  double value;
  Vec3 lo;
  Vec3 hi;
};

std::vector<Face> faces_of(const SynthScene& s) {
  std::vector<Face> out;
  for (int a = 0; a < 3; ++a) {
    for (double v : {s.room.min[a], s.room.max[a]}) out.push_back({a, v, s.room.min, s.room.max});
  }
  for (const auto& p : s.pillars) {
    for (int a = 0; a < 2; ++a) {
      for (double v : {p.min[a], p.max[a]}) out.push_back({a, v, p.min, p.max});
    }
  }
  return out;
}

bool inside_open(const Aabb& b, const Vec3& p, int skip_axis) {
  for (int a = 0; a < 3; ++a) {
    if (a == skip_axis) continue;
    if (!(p[a] > b.min[a] + 1e-9 && p[a] < b.max[a] - 1e-9)) return false;
  }
  return true;
}

Vec3 axis_normal(int axis, double sign) {
  Vec3 n = Vec3::Zero();
  n[axis] = sign;
  return n;
}

}  // namespace

std::optional<SurfaceHit> SynthScene::cast(const Vec3& o, const Vec3& d, double max_range) const {
  double best = std::numeric_limits<double>::infinity();
  Vec3 normal = Vec3::Zero();
  // Exit through the room walls.
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-15) continue;
    const double bound = d[a] > 0 ? room.max[a] : room.min[a];
    const double t = (bound - o[a]) / d[a];
    if (t >= 0 && t < best) {
      best = t;
      normal = axis_normal(a, d[a] > 0 ? -1.0 : 1.0);
    }
  }
  // Entry into obstacles (slab test).
  for (const auto& b : pillars) {
    double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
    int entry_axis = -1;
    bool miss = false;
    for (int a = 0; a < 3; ++a) {
      if (std::abs(d[a]) < 1e-15) {
        if (o[a] < b.min[a] || o[a] > b.max[a]) miss = true;
        continue;
      }
      double ta = (b.min[a] - o[a]) / d[a];
      double tb = (b.max[a] - o[a]) / d[a];
      if (ta > tb) std::swap(ta, tb);
      if (ta > t0) {
        t0 = ta;
        entry_axis = a;
      }
      t1 = std::min(t1, tb);
    }
    if (miss || t0 > t1 || entry_axis < 0) continue;
    if (t0 < best) {
      best = t0;
      normal = axis_normal(entry_axis, d[entry_axis] > 0 ? -1.0 : 1.0);
    }
  }
  if (!(best <= max_range)) return std::nullopt;
  return SurfaceHit{best, normal};
}

bool SynthScene::visible(const Vec3& eye, const Vec3& p, double max_incidence) const {
  const Vec3 delta = p - eye;
  const double len = delta.norm();
  if (len < 1e-9) return false;
  const Vec3 d = delta / len;
  const auto hit = cast(eye, d, len + 1.0);
  if (!hit || hit->distance < len - 1e-6) return false;
  return -d.dot(hit->normal) >= std::cos(max_incidence);
}

SynthConfig::SynthConfig() {
  Mat3 R;
  // LiDAR x = camera z, LiDAR y = -camera x, LiDAR z = -camera y.
  R << 0, -1, 0, 0, 0, -1, 1, 0, 0;
  extrinsics.T_cl = Pose::FromMatrix(R, Vec3(0.0, -0.1, 0.05));
}

void SynthConfig::validate() const {
  camera.validate();
  voxels.validate();
  const auto bad = [](const char* what) {
    throw Error(ErrorCode::kConfig, std::string("synth: invalid ") + what);
  };
  for (int a = 0; a < 3; ++a) {
    if (!(scene.room.max[a] > scene.room.min[a])) bad("room bounds");
  }
  if (landmarks == 0) bad("landmark count");
  if (descriptor_dim < 2) bad("descriptor_dim");
  if (frames < 2) bad("frame count");
  if (!(frame_rate > 0)) bad("frame_rate");
  if (!(loop_radius_x > 0) || !(loop_radius_y > 0)) bad("loop radii");
  if (!(max_incidence > 0) || !(max_range > 0)) bad("visibility limits");
  if (lidar_beams < 2 || !(lidar_vertical_fov > 0) || !(lidar_azimuth_step > 0) ||
      !(lidar_max_range > 0) || lidar_every < 1) {
    bad("lidar parameters");
  }
  if (!(reference_spacing > 0)) bad("reference_spacing");
  if (pixel_sigma < 0 || descriptor_sigma < 0 || range_sigma < 0 || prior_sigma_t < 0 ||
      prior_sigma_r < 0) {
    bad("noise sigma");
  }
}

SynthWorld synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  SynthWorld w;
  w.cfg = cfg;
  const SynthScene& scene = cfg.scene;
  const double res = cfg.voxels.resolution;

  // Candidate sites: voxel-grid centers on every face, one per voxel.
  std::vector<Vec3> sites;
  std::set<std::tuple<long, long, long>> seen;
  const auto grid = [&](int axis, double lo, double hi) {
    std::vector<double> out;
    const double o = cfg.voxels.origin[axis];
    for (long k = static_cast<long>(std::ceil((lo - o) / res - 0.5 - 1e-9));; ++k) {
      const double c = o + res * (static_cast<double>(k) + 0.5);
      if (c > hi + 1e-9) break;
      if (c >= lo - 1e-9) out.push_back(c);
    }
    return out;
  };
  for (const Face& f : faces_of(scene)) {
    const int u = (f.axis + 1) % 3, v = (f.axis + 2) % 3;
    for (double cu : grid(u, f.lo[u], f.hi[u])) {
      for (double cv : grid(v, f.lo[v], f.hi[v])) {
        Vec3 p;
        p[f.axis] = f.value;
        p[u] = cu;
        p[v] = cv;
        bool hidden = false;
        for (const auto& b : scene.pillars) hidden = hidden || inside_open(b, p, -1);
        if (f.axis == 2) {
          for (const auto& b : scene.pillars) hidden = hidden || inside_open(b, p, 2);
        }
        if (hidden) continue;
        bool outside = false;
        for (int a = 0; a < 3; ++a) {
          outside = outside || p[a] < scene.room.min[a] - 1e-9 || p[a] > scene.room.max[a] + 1e-9;
        }
        if (outside) continue;
        const auto key = std::make_tuple(std::lround(p.x() / res * 2), std::lround(p.y() / res * 2),
                                         std::lround(p.z() / res * 2));
        if (seen.insert(key).second) sites.push_back(p);
      }
    }
  }
  if (sites.size() < cfg.landmarks) {
    throw Error(ErrorCode::kConfig, "synth: more landmarks than surface sites");
  }

  std::mt19937_64 pick(derive_seed({cfg.seed, 1}));
  std::vector<std::size_t> order(sites.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = 0; i < cfg.landmarks; ++i) {
    std::uniform_int_distribution<std::size_t> u(i, order.size() - 1);
    std::swap(order[i], order[u(pick)]);
  }
  order.resize(cfg.landmarks);
  std::sort(order.begin(), order.end());
  std::mt19937_64 desc_rng(derive_seed({cfg.seed, 2}));
  std::normal_distribution<double> n01;
  for (std::size_t i : order) {
    Eigen::VectorXd d(cfg.descriptor_dim);
    for (int k = 0; k < d.size(); ++k) d[k] = n01(desc_rng);
    w.landmarks.push_back({sites[i], d.normalized()});
  }

  std::mt19937_64 prior_rng(derive_seed({cfg.seed, 3}));
  for (std::size_t i = 0; i < cfg.frames; ++i) {
    const double th = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(cfg.frames);
    const Vec3 pos(cfg.loop_radius_x * std::cos(th), cfg.loop_radius_y * std::sin(th),
                   cfg.camera_height);
    const double psi = std::atan2(cfg.loop_radius_y * std::cos(th), -cfg.loop_radius_x * std::sin(th));
    const Vec3 fwd(std::cos(psi), std::sin(psi), 0.0);
    const Vec3 right(std::sin(psi), -std::cos(psi), 0.0);
    Mat3 R;
    R.col(0) = right;
    R.col(1) = Vec3(0, 0, -1);
    R.col(2) = fwd;
    const Pose T = Pose::FromMatrix(R, pos);
    const double t = static_cast<double>(i) / cfg.frame_rate;
    w.gt.push_back(t, T);
    Vec3 dt, dr;
    for (int k = 0; k < 3; ++k) dt[k] = cfg.prior_sigma_t * n01(prior_rng);
    for (int k = 0; k < 3; ++k) dr[k] = cfg.prior_sigma_r * n01(prior_rng);
    w.priors.push_back(t, Pose(T.rotation() * quat_exp(dr), T.translation() + dt));
  }
  return w;
}

OracleConfig SynthWorld::oracle_config() const {
  OracleConfig oc;
  oc.pixel_sigma = cfg.pixel_sigma;
  oc.descriptor_sigma = cfg.descriptor_sigma;
  oc.max_range = cfg.max_range;
  oc.seed = derive_seed({cfg.seed, 5});
  return oc;
}

SyntheticOracle SynthWorld::oracle() const {
  std::vector<Pose> poses;
  for (const auto& sp : gt) poses.push_back(sp.pose);
  const SynthScene scene = cfg.scene;
  const double inc = cfg.max_incidence;
  return SyntheticOracle(landmarks, cfg.camera, std::move(poses), oracle_config(),
                         [scene, inc](const Vec3& eye, const Vec3& p) {
                           return scene.visible(eye, p, inc);
                         });
}

std::vector<std::size_t> SynthWorld::scan_frames() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < gt.size(); i += cfg.lidar_every) out.push_back(i);
  if (out.back() != gt.size() - 1) out.push_back(gt.size() - 1);
  return out;
}

Trajectory SynthWorld::lidar_gt() const {
  Trajectory out;
  for (std::size_t i : scan_frames()) {
    out.push_back(gt[i].timestamp, gt[i].pose * cfg.extrinsics.T_cl);
  }
  return out;
}

LidarScan SynthWorld::render_scan(std::size_t frame) const {
  const Pose T_wl = gt[frame].pose * cfg.extrinsics.T_cl;
  const Mat3 R = T_wl.rotation_matrix();
  std::mt19937_64 rng(derive_seed({cfg.seed, 4, frame}));
  std::normal_distribution<double> n01;
  LidarScan scan;
  scan.timestamp = gt[frame].timestamp;
  const int n_az = static_cast<int>(std::round(2.0 * kPi / cfg.lidar_azimuth_step));
  for (int b = 0; b < cfg.lidar_beams; ++b) {
    const double el = -0.5 * cfg.lidar_vertical_fov +
                      cfg.lidar_vertical_fov * b / static_cast<double>(cfg.lidar_beams - 1);
    for (int a = 0; a < n_az; ++a) {
      const double az = a * cfg.lidar_azimuth_step;
      const Vec3 d(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
      const auto hit = cfg.scene.cast(T_wl.translation(), R * d, cfg.lidar_max_range);
      const double noise = cfg.range_sigma * n01(rng);
      if (!hit) continue;
      scan.points.push_back(d * (hit->distance + noise));
    }
  }
  return scan;
}

std::vector<LidarScan> SynthWorld::scans() const {
  std::vector<LidarScan> out;
  for (std::size_t i : scan_frames()) out.push_back(render_scan(i));
  return out;
}

std::vector<Vec3> SynthWorld::reference_cloud() const {
  std::vector<Vec3> out;
  const double h = cfg.reference_spacing;
  for (const Face& f : faces_of(cfg.scene)) {
    const int u = (f.axis + 1) % 3, v = (f.axis + 2) % 3;
    for (double cu = f.lo[u] + 0.5 * h; cu < f.hi[u]; cu += h) {
      for (double cv = f.lo[v] + 0.5 * h; cv < f.hi[v]; cv += h) {
        Vec3 p;
        p[f.axis] = f.value;
        p[u] = cu;
        p[v] = cv;
        // Floor and ceiling samples under a pillar are hidden by it.
        bool hidden = false;
        for (const auto& b : cfg.scene.pillars) {
          hidden = hidden || inside_open(b, p, -1) || (f.axis == 2 && inside_open(b, p, 2));
        }
        if (!hidden) out.push_back(p);
      }
    }
  }
  return out;
}

VoxelMap SynthWorld::surface_voxels() const {
  VoxelMap map(cfg.voxels);
  const double h = 0.25 * cfg.voxels.resolution;
  std::set<std::tuple<int, int, int>> done;
  for (const Face& f : faces_of(cfg.scene)) {
    const int u = (f.axis + 1) % 3, v = (f.axis + 2) % 3;
    for (double cu = f.lo[u]; cu <= f.hi[u] + 1e-9; cu += h) {
      for (double cv = f.lo[v]; cv <= f.hi[v] + 1e-9; cv += h) {
        Vec3 p;
        p[f.axis] = f.value;
        p[u] = cu;
        p[v] = cv;
        const VoxelKey k = map.key_of(p);
        if (done.insert({k.x, k.y, k.z}).second) map.update(k, true);
      }
    }
  }
  map.freeze();
  return map;
}

std::vector<double> SynthWorld::frame_times() const {
  std::vector<double> out;
  for (const auto& sp : gt) out.push_back(sp.timestamp);
  return out;
}

}  // namespace priorloc
