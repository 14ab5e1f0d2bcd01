#include "priorloc/voxel_map/voxel_map.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <unordered_set>

#include "priorloc/common/error.hpp"

namespace priorloc {
namespace {

constexpr std::uint32_t kSectionVersion = 1;
constexpr double kInf = std::numeric_limits<double>::infinity();

// Amanatides-Woo stepping state along a normalized direction.
struct DdaWalker {
  std::int64_t idx[3];
  int step[3];
  double t_max[3];
  double t_delta[3];
  double t_entry = 0.0;

  DdaWalker(const Vec3& origin, const Vec3& dir, const VoxelMapConfig& cfg) {
    const Vec3 g = (origin - cfg.origin) / cfg.resolution;
    for (int a = 0; a < 3; ++a) {
      idx[a] = static_cast<std::int64_t>(std::floor(g[a]));
      if (dir[a] > 0.0) {
        step[a] = 1;
        t_delta[a] = cfg.resolution / dir[a];
        t_max[a] = (static_cast<double>(idx[a] + 1) - g[a]) * cfg.resolution / dir[a];
      } else if (dir[a] < 0.0) {
        step[a] = -1;
        t_delta[a] = cfg.resolution / -dir[a];
        t_max[a] = (g[a] - static_cast<double>(idx[a])) * cfg.resolution / -dir[a];
      } else {
        step[a] = 0;
        t_delta[a] = kInf;
        t_max[a] = kInf;
      }
    }
  }

  VoxelKey key() const {
    return {static_cast<std::int32_t>(idx[0]), static_cast<std::int32_t>(idx[1]),
            static_cast<std::int32_t>(idx[2])};
  }

  void advance() {
    int a = 0;
    if (t_max[1] < t_max[a]) a = 1;
    if (t_max[2] < t_max[a]) a = 2;
    t_entry = t_max[a];
    idx[a] += step[a];
    t_max[a] += t_delta[a];
  }
};

// Slab test of a ray against an axis-aligned box; returns [t0, t1] or empty.
bool clip_ray(const Vec3& o, const Vec3& d, const Vec3& lo, const Vec3& hi, double& t0,
              double& t1) {
  t0 = -kInf;
  t1 = kInf;
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < lo[a] || o[a] > hi[a]) return false;
      continue;
    }
    double ta = (lo[a] - o[a]) / d[a];
    double tb = (hi[a] - o[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  return t0 <= t1;
}

}  // namespace

void VoxelMapConfig::validate() const {
  if (!(resolution > 0.0)) throw Error(ErrorCode::kConfig, "voxel resolution must be > 0");
  if (!(log_odds_min <= occupancy_threshold && occupancy_threshold < log_odds_max)) {
    throw Error(ErrorCode::kConfig, "occupancy threshold must lie in [l_min, l_max)");
  }
  if (!(hit_increment > 0.0 && miss_increment < 0.0)) {
    throw Error(ErrorCode::kConfig, "hit increment must be > 0 and miss increment < 0");
  }
  if (!(max_range > 0.0)) throw Error(ErrorCode::kConfig, "voxel max_range must be > 0");
  if (!origin.allFinite()) throw Error(ErrorCode::kConfig, "voxel origin must be finite");
}

VoxelMap::VoxelMap(VoxelMapConfig config) : config_(std::move(config)) { config_.validate(); }

VoxelKey VoxelMap::key_of(const Vec3& p) const {
  const Vec3 g = (p - config_.origin) / config_.resolution;
  return {static_cast<std::int32_t>(std::floor(g.x())),
          static_cast<std::int32_t>(std::floor(g.y())),
          static_cast<std::int32_t>(std::floor(g.z()))};
}

Vec3 VoxelMap::center_of(const VoxelKey& key) const {
  return config_.origin +
         config_.resolution * Vec3(key.x + 0.5, key.y + 0.5, key.z + 0.5);
}

void VoxelMap::apply(VoxelCell& cell, bool hit) const {
  if (hit) {
    ++cell.hits;
    cell.log_odds += config_.hit_increment;
  } else {
    ++cell.misses;
    cell.log_odds += config_.miss_increment;
  }
  cell.log_odds = std::clamp(cell.log_odds, config_.log_odds_min, config_.log_odds_max);
}

void VoxelMap::update(const VoxelKey& key, bool hit) {
  if (frozen_) throw Error(ErrorCode::kInternal, "voxel map is frozen");
  apply(cells_[key], hit);
}

std::vector<VoxelKey> VoxelMap::traverse(const Vec3& from, const Vec3& to) const {
  std::vector<VoxelKey> keys;
  const Vec3 diff = to - from;
  const double length = diff.norm();
  DdaWalker walk(from, length > 0.0 ? Vec3(diff / length) : Vec3::Zero(), config_);
  keys.push_back(walk.key());
  if (length == 0.0) return keys;
  const VoxelKey end = key_of(to);
  const std::size_t guard = static_cast<std::size_t>(3.0 * length / config_.resolution) + 8;
  while (keys.back() != end && keys.size() < guard) {
    walk.advance();
    if (walk.t_entry > length) break;
    keys.push_back(walk.key());
  }
  return keys;
}

void VoxelMap::integrate_scan(std::span<const Vec3> scan, const Pose& pose) {
  if (frozen_) throw Error(ErrorCode::kInternal, "voxel map is frozen");
  if (!pose.is_finite()) throw Error(ErrorCode::kConfig, "sensor pose must be finite");
  if (scan.empty()) return;

  std::unordered_set<VoxelKey, VoxelKeyHash> hits, misses;
  const Vec3 sensor = pose.translation();
  const VoxelKey sensor_key = key_of(sensor);
  for (const Vec3& p : scan) {
    const double range = p.norm();
    if (!p.allFinite() || range > config_.max_range || range < 1e-6) continue;
    const Vec3 end = pose * p;
    const VoxelKey end_key = key_of(end);
    hits.insert(end_key);
    for (const VoxelKey& k : traverse(sensor, end)) {
      if (k != sensor_key && k != end_key) misses.insert(k);
    }
  }
  for (const VoxelKey& k : hits) apply(cells_[k], true);
  for (const VoxelKey& k : misses) {
    if (!hits.contains(k)) apply(cells_[k], false);
  }
}

bool VoxelMap::occupied(const VoxelKey& key) const {
  const auto it = cells_.find(key);
  return it != cells_.end() && it->second.log_odds > config_.occupancy_threshold;
}

const VoxelCell* VoxelMap::find(const VoxelKey& key) const {
  const auto it = cells_.find(key);
  return it == cells_.end() ? nullptr : &it->second;
}

std::size_t VoxelMap::occupied_count() const {
  return static_cast<std::size_t>(std::count_if(cells_.begin(), cells_.end(), [&](const auto& kv) {
    return kv.second.log_odds > config_.occupancy_threshold;
  }));
}

std::vector<VoxelKey> VoxelMap::occupied_keys() const {
  std::vector<VoxelKey> keys;
  for (const auto& [k, c] : cells_) {
    if (c.log_odds > config_.occupancy_threshold) keys.push_back(k);
  }
  std::sort(keys.begin(), keys.end());
  return keys;
}

void VoxelMap::freeze() {
  any_occupied_ = false;
  Vec3 lo = Vec3::Constant(kInf), hi = Vec3::Constant(-kInf);
  for (const auto& [k, c] : cells_) {
    if (c.log_odds <= config_.occupancy_threshold) continue;
    any_occupied_ = true;
    const Vec3 corner = config_.origin + config_.resolution * Vec3(k.x, k.y, k.z);
    lo = lo.cwiseMin(corner);
    hi = hi.cwiseMax(corner + Vec3::Constant(config_.resolution));
  }
  bounds_min_ = lo;
  bounds_max_ = hi;
  frozen_ = true;
}

std::optional<RayHit> VoxelMap::ray_trace(const Vec3& origin, const Vec3& through,
                                          double max_range) const {
  const Vec3 diff = through - origin;
  const double n = diff.norm();
  if (!(n > 1e-9)) throw Error(ErrorCode::kDegenerateRay, "ray direction norm is ~0");
  const Vec3 dir = diff / n;

  double limit = max_range;
  if (frozen_) {
    if (!any_occupied_) return std::nullopt;
    double t0, t1;
    if (!clip_ray(origin, dir, bounds_min_, bounds_max_, t0, t1) || t1 < 0.0 ||
        t0 > max_range) {
      return std::nullopt;
    }
    limit = std::min(max_range, t1 + 1e-9);
  } else if (cells_.empty()) {
    return std::nullopt;
  }

  DdaWalker walk(origin, dir, config_);
  const std::size_t guard = static_cast<std::size_t>(3.0 * limit / config_.resolution) + 8;
  for (std::size_t i = 0; i < guard; ++i) {
    const VoxelKey k = walk.key();
    if (occupied(k)) return RayHit{k, center_of(k), walk.t_entry};
    walk.advance();
    if (walk.t_entry > limit) break;
  }
  return std::nullopt;
}

void VoxelMap::serialize(ByteWriter& out) const {
  out.put<std::uint32_t>(kSectionVersion);
  out.put(config_.resolution);
  for (int a = 0; a < 3; ++a) out.put(config_.origin[a]);
  out.put(config_.hit_increment);
  out.put(config_.miss_increment);
  out.put(config_.log_odds_min);
  out.put(config_.log_odds_max);
  out.put(config_.occupancy_threshold);
  out.put(config_.max_range);
  out.put<std::uint8_t>(frozen_ ? 1 : 0);

  std::vector<VoxelKey> keys;
  keys.reserve(cells_.size());
  for (const auto& kv : cells_) keys.push_back(kv.first);
  std::sort(keys.begin(), keys.end());
  out.put<std::uint64_t>(keys.size());
  for (const VoxelKey& k : keys) {
    const VoxelCell& c = cells_.at(k);
    out.put(k.x);
    out.put(k.y);
    out.put(k.z);
    out.put(c.hits);
    out.put(c.misses);
    out.put(c.log_odds);
  }
}

VoxelMap VoxelMap::deserialize(ByteReader& in) {
  const auto version = in.get<std::uint32_t>();
  if (version != kSectionVersion) {
    throw Error(ErrorCode::kVersionMismatch,
                "voxel section version " + std::to_string(version));
  }
  VoxelMapConfig cfg;
  cfg.resolution = in.get<double>();
  for (int a = 0; a < 3; ++a) cfg.origin[a] = in.get<double>();
  cfg.hit_increment = in.get<double>();
  cfg.miss_increment = in.get<double>();
  cfg.log_odds_min = in.get<double>();
  cfg.log_odds_max = in.get<double>();
  cfg.occupancy_threshold = in.get<double>();
  cfg.max_range = in.get<double>();
  const bool frozen = in.get<std::uint8_t>() != 0;
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kCorrupt, std::string("voxel config: ") + e.what());
  }
  VoxelMap map(cfg);
  const auto count = in.get<std::uint64_t>();
  constexpr std::size_t kCellBytes = 3 * 4 + 2 * 4 + 8;
  if (count > in.remaining() / kCellBytes) throw Error(ErrorCode::kCorrupt, "voxel count");
  map.cells_.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    VoxelKey k;
    k.x = in.get<std::int32_t>();
    k.y = in.get<std::int32_t>();
    k.z = in.get<std::int32_t>();
    VoxelCell c;
    c.hits = in.get<std::uint32_t>();
    c.misses = in.get<std::uint32_t>();
    c.log_odds = in.get<double>();
    if (!(c.log_odds >= cfg.log_odds_min && c.log_odds <= cfg.log_odds_max)) {
      throw Error(ErrorCode::kCorrupt, "voxel log-odds outside clamp range");
    }
    map.cells_.emplace(k, c);
  }
  if (frozen) map.freeze();
  return map;
}

void VoxelMap::export_ply(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  const auto keys = occupied_keys();
  out << "ply\nformat ascii 1.0\nelement vertex " << keys.size()
      << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  for (const VoxelKey& k : keys) {
    const Vec3 c = center_of(k);
    out << c.x() << ' ' << c.y() << ' ' << c.z() << '\n';
  }
}

bool VoxelMap::operator==(const VoxelMap& other) const {
  return config_ == other.config_ && cells_ == other.cells_;
}

}  // namespace priorloc
