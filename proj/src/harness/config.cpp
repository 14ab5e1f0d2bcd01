#include "priorloc/harness/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "priorloc/common/binary_io.hpp"
#include "priorloc/common/error.hpp"

namespace priorloc {

namespace {

[[noreturn]] void bad_value(const std::string& value, const char* type) {
  throw Error(ErrorCode::kConfig, "cannot parse '" + value + "' as " + type);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// Shortest text that parses back to exactly `v`.
std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) bad_value(s, "a number");
  return v;
}

template <typename Int>
Int parse_int(const std::string& s) {
  Int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) bad_value(s, "an integer");
  return v;
}

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  bad_value(s, "a boolean (true/false)");
}

Vec3 parse_vec3(const std::string& s) {
  Vec3 v;
  std::istringstream in(s);
  std::string part;
  for (int i = 0; i < 3; ++i) {
    if (!std::getline(in, part, ',')) bad_value(s, "x,y,z");
    v[i] = parse_double(trim(part));
  }
  if (std::getline(in, part)) bad_value(s, "x,y,z");
  return v;
}


template <typename T>
ConfigKey make_key(std::string key, std::string doc, std::function<T&(RunConfig&)> ref) {
  ConfigKey k;
  k.key = std::move(key);
  k.doc = std::move(doc);
  k.get = [ref](const RunConfig& c) {
    const T& v = ref(const_cast<RunConfig&>(c));
    if constexpr (std::is_same_v<T, double>) {
      return format_double(v);
    } else if constexpr (std::is_same_v<T, bool>) {
      return std::string(v ? "true" : "false");
    } else if constexpr (std::is_same_v<T, std::string>) {
      return v;
    } else if constexpr (std::is_same_v<T, Vec3>) {
      return format_double(v.x()) + "," + format_double(v.y()) + "," + format_double(v.z());
    } else {
      return std::to_string(v);
    }
  };
  k.set = [ref](RunConfig& c, const std::string& s) {
    T& v = ref(c);
    if constexpr (std::is_same_v<T, double>) {
      v = parse_double(s);
    } else if constexpr (std::is_same_v<T, bool>) {
      v = parse_bool(s);
    } else if constexpr (std::is_same_v<T, std::string>) {
      v = s;
    } else if constexpr (std::is_same_v<T, Vec3>) {
      v = parse_vec3(s);
    } else {
      v = parse_int<T>(s);
    }
  };
  return k;
}

/// An angle stored in radians, exposed in degrees.
ConfigKey degrees_key(std::string key, std::string doc, std::function<double&(RunConfig&)> ref) {
  ConfigKey k;
  k.key = std::move(key);
  k.doc = std::move(doc);
  k.get = [ref](const RunConfig& c) {
    return format_double(ref(const_cast<RunConfig&>(c)) / kDegToRad);
  };
  k.set = [ref](RunConfig& c, const std::string& s) { ref(c) = parse_double(s) * kDegToRad; };
  return k;
}

#define PL_KEY(T, name, doc, expr) \
  make_key<T>(name, doc, [](RunConfig& c) -> T& { return expr; })
#define PL_DEG(name, doc, expr) \
  degrees_key(name, doc, [](RunConfig& c) -> double& { return expr; })

std::vector<ConfigKey> build_keys() {
  std::vector<ConfigKey> k;
  // synthetic world
  k.push_back(PL_KEY(std::size_t, "synth.frames", "camera frames on the loop", c.synth.frames));
  k.push_back(PL_KEY(std::size_t, "synth.landmarks", "landmarks on the surfaces", c.synth.landmarks));
  k.push_back(PL_KEY(int, "synth.descriptor_dim", "local descriptor size", c.synth.descriptor_dim));
  k.push_back(PL_KEY(double, "synth.frame_rate", "camera rate, Hz", c.synth.frame_rate));
  k.push_back(PL_KEY(double, "synth.loop_radius_x", "loop half-axis along x, m", c.synth.loop_radius_x));
  k.push_back(PL_KEY(double, "synth.loop_radius_y", "loop half-axis along y, m", c.synth.loop_radius_y));
  k.push_back(PL_KEY(std::size_t, "synth.lidar_every", "one LiDAR scan every this many frames", c.synth.lidar_every));
  k.push_back(PL_KEY(double, "synth.pixel_sigma", "keypoint noise, px", c.synth.pixel_sigma));
  k.push_back(PL_KEY(double, "synth.descriptor_sigma", "descriptor noise per component", c.synth.descriptor_sigma));
  k.push_back(PL_KEY(double, "synth.range_sigma", "LiDAR range noise, m", c.synth.range_sigma));
  k.push_back(PL_KEY(double, "synth.prior_sigma_t", "camera prior translation noise, m", c.synth.prior_sigma_t));
  k.push_back(PL_DEG("synth.prior_sigma_r", "camera prior rotation noise, deg", c.synth.prior_sigma_r));
  k.push_back(PL_KEY(std::uint64_t, "synth.seed", "world seed", c.synth.seed));
  // registration
  k.push_back(PL_KEY(double, "registration.gicp.max_correspondence_distance", "GICP association gate, m", c.registration.gicp.max_correspondence_distance));
  k.push_back(PL_KEY(int, "registration.gicp.max_iterations", "GICP iterations per stage", c.registration.gicp.max_iterations));
  k.push_back(PL_KEY(double, "registration.gicp.tol_translation", "GICP convergence, m of centroid displacement", c.registration.gicp.tol_translation));
  k.push_back(PL_KEY(double, "registration.gicp.tol_rotation", "GICP convergence, rad", c.registration.gicp.tol_rotation));
  k.push_back(PL_KEY(int, "registration.gicp.max_step_halvings", "GICP step halvings before stopping", c.registration.gicp.max_step_halvings));
  k.push_back(PL_KEY(int, "registration.covariance_neighbors", "neighbors per point covariance", c.registration.covariance_neighbors));
  k.push_back(PL_KEY(double, "registration.covariance_epsilon", "covariance regularization along the normal", c.registration.covariance_epsilon));
  k.push_back(PL_KEY(double, "registration.reference_leaf_size", "reference cloud downsampling, m", c.reference_leaf_size));
  k.push_back(PL_KEY(double, "registration.scan_leaf_size", "scan voxel downsampling, m", c.registration.scan_leaf_size));
  k.push_back(PL_KEY(double, "registration.max_scan_cost", "scan-to-map mean cost counted as failure", c.registration.max_scan_cost));
  k.push_back(PL_KEY(int, "registration.max_failed_scans", "consecutive failures before TrackingLost", c.registration.max_failed_scans));
  // voxel map
  k.push_back(PL_KEY(double, "voxels.resolution", "voxel edge, m", c.voxels.resolution));
  k.push_back(PL_KEY(Vec3, "voxels.origin", "world position of voxel (0,0,0)'s min corner, x,y,z m", c.voxels.origin));
  k.push_back(PL_KEY(double, "voxels.hit_increment", "log-odds added per hit", c.voxels.hit_increment));
  k.push_back(PL_KEY(double, "voxels.miss_increment", "log-odds added per miss", c.voxels.miss_increment));
  k.push_back(PL_KEY(double, "voxels.log_odds_min", "log-odds clamp, low", c.voxels.log_odds_min));
  k.push_back(PL_KEY(double, "voxels.log_odds_max", "log-odds clamp, high", c.voxels.log_odds_max));
  k.push_back(PL_KEY(double, "voxels.occupancy_threshold", "occupied iff log-odds exceeds this", c.voxels.occupancy_threshold));
  k.push_back(PL_KEY(double, "voxels.max_range", "integration range cutoff, m", c.voxels.max_range));
  // mapping
  k.push_back(PL_KEY(double, "mapping.keyframes.d_trans", "new keyframe after this translation, m", c.mapping.sampling.d_trans));
  k.push_back(PL_DEG("mapping.keyframes.d_rot", "new keyframe after this rotation, deg", c.mapping.sampling.d_rot));
  k.push_back(PL_KEY(double, "mapping.keyframes.co_trans", "co-observing pair translation gate, m", c.mapping.sampling.co_trans));
  k.push_back(PL_DEG("mapping.keyframes.co_rot", "co-observing pair rotation gate, deg", c.mapping.sampling.co_rot));
  k.push_back(PL_KEY(double, "mapping.matching.ratio", "Lowe ratio on cosine distance", c.mapping.matching.ratio));
  k.push_back(PL_KEY(double, "mapping.matching.max_distance", "matches at or above this distance are dropped", c.mapping.matching.max_distance));
  k.push_back(PL_DEG("mapping.triangulation.min_parallax", "largest ray angle needed, deg", c.mapping.triangulation.min_parallax));
  k.push_back(PL_KEY(double, "mapping.triangulation.max_reprojection", "triangulation gate in every view, px", c.mapping.triangulation.max_reprojection));
  k.push_back(PL_KEY(int, "mapping.triangulation.refine_iterations", "Gauss-Newton steps after the linear solve", c.mapping.triangulation.refine_iterations));
  k.push_back(PL_KEY(double, "mapping.extend_reprojection", "gate for adding a view to an existing point, px", c.mapping.extend_reprojection));
  k.push_back(PL_KEY(bool, "mapping.local_gaba", "sliding-window bundle adjustment per keyframe", c.mapping.local_gaba));
  k.push_back(PL_KEY(int, "mapping.local_window", "sliding window, keyframes", c.mapping.local_window));
  k.push_back(PL_KEY(int, "mapping.global_every", "periodic global pass, keyframes (0 disables)", c.mapping.global_every));
  k.push_back(PL_KEY(bool, "mapping.incremental_structure", "structure factor in the incremental passes", c.mapping.incremental_structure));
  k.push_back(PL_KEY(double, "mapping.gaba.huber_visual", "visual Huber threshold, px", c.mapping.gaba.huber_visual));
  k.push_back(PL_KEY(double, "mapping.gaba.huber_struct", "structure Huber threshold, m", c.mapping.gaba.huber_struct));
  k.push_back(PL_KEY(double, "mapping.gaba.huber_prior", "prior Huber threshold, whitened", c.mapping.gaba.huber_prior));
  k.push_back(PL_KEY(double, "mapping.gaba.sigma_visual", "visual sigma, px", c.mapping.gaba.sigma_visual));
  k.push_back(PL_KEY(double, "mapping.gaba.sigma_struct", "structure sigma, m (floored at half a voxel)", c.mapping.gaba.sigma_struct));
  k.push_back(PL_KEY(double, "mapping.gaba.sigma_prior_t", "prior translation sigma, m", c.mapping.gaba.sigma_prior_t));
  k.push_back(PL_DEG("mapping.gaba.sigma_prior_r", "prior rotation sigma, deg", c.mapping.gaba.sigma_prior_r));
  k.push_back(PL_KEY(int, "mapping.gaba.rounds", "association rounds", c.mapping.gaba.rounds));
  k.push_back(PL_KEY(int, "mapping.gaba.inner_iters", "LM iterations per round", c.mapping.gaba.inner_iters));
  k.push_back(PL_KEY(bool, "mapping.gaba.use_structure", "structure factor on", c.mapping.gaba.use_structure));
  k.push_back(PL_KEY(bool, "mapping.gaba.use_prior", "prior factor on", c.mapping.gaba.use_prior));
  k.push_back(PL_KEY(double, "mapping.gaba.struct_gate", "max point-to-hit distance for association, m", c.mapping.gaba.struct_gate));
  k.push_back(PL_KEY(double, "mapping.gaba.min_ray_length", "ray start offset from the eye, m (<= 0: two voxels)", c.mapping.gaba.min_ray_length));
  k.push_back(PL_KEY(bool, "mapping.gaba.per_pair_structure", "one structure term per observation", c.mapping.gaba.per_pair_structure));
  k.push_back(PL_KEY(bool, "mapping.gaba.cull_outliers", "detach outlier observations after the last round", c.mapping.gaba.cull_outliers));
  k.push_back(PL_KEY(double, "mapping.gaba.outlier_sigma", "outlier gate, multiples of sigma_visual", c.mapping.gaba.outlier_sigma));
  k.push_back(PL_KEY(double, "mapping.gaba.cost_tolerance", "relative slack of the cost diagnostic", c.mapping.gaba.cost_tolerance));
  k.push_back(PL_KEY(bool, "mapping.gaba.refine_surface", "refine ray hits to the surface crossing", c.mapping.gaba.refine_surface));
  k.push_back(PL_KEY(bool, "mapping.gaba.warm_start", "visual+prior solve before the first association", c.mapping.gaba.warm_start));
  // localization
  k.push_back(PL_KEY(double, "localizer.match_radius", "local map matching radius, px", c.localizer.match_radius));
  k.push_back(PL_KEY(double, "localizer.reload_radius", "map point reload radius, px", c.localizer.reload_radius));
  k.push_back(PL_KEY(int, "localizer.w_min", "co-visibility weight of the active cluster", c.localizer.w_min));
  k.push_back(PL_KEY(bool, "localizer.relocalize_on_loss", "relocalize the frame that lost tracking", c.localizer.relocalize_on_loss));
  k.push_back(PL_KEY(double, "localizer.desc_gate", "map matching descriptor gate, cosine distance", c.localizer.match.desc_gate));
  k.push_back(PL_KEY(std::size_t, "localizer.reloc.k", "retrieved keyframes", c.localizer.reloc.k));
  k.push_back(PL_KEY(double, "localizer.reloc.min_similarity", "retrieval cosine floor", c.localizer.reloc.min_similarity));
  k.push_back(PL_KEY(int, "localizer.reloc.w_min", "co-visibility weight of retrieval clusters", c.localizer.reloc.w_min));
  k.push_back(PL_KEY(double, "localizer.reloc.ratio", "relocalization Lowe ratio", c.localizer.reloc.matching.ratio));
  k.push_back(PL_KEY(std::size_t, "localizer.reloc.min_matches", "2D-3D matches needed", c.localizer.reloc.min_matches));
  k.push_back(PL_KEY(int, "localizer.reloc.min_inliers", "PnP inliers needed", c.localizer.reloc.min_inliers));
  k.push_back(PL_KEY(double, "localizer.pnp.reproj_gate", "PnP inlier gate, px", c.localizer.reloc.pnp.reproj_gate));
  k.push_back(PL_KEY(double, "localizer.pnp.confidence", "RANSAC confidence", c.localizer.reloc.pnp.confidence));
  k.push_back(PL_KEY(int, "localizer.pnp.max_iterations", "RANSAC iteration cap", c.localizer.reloc.pnp.max_iterations));
  k.push_back(PL_KEY(std::uint64_t, "localizer.pnp.seed", "RANSAC seed", c.localizer.reloc.pnp.seed));
  k.push_back(PL_KEY(std::size_t, "localizer.track.min_tracked", "tracked points needed", c.localizer.track.min_tracked));
  k.push_back(PL_KEY(double, "localizer.track.flow_radius", "feature-flow search radius, px", c.localizer.track.flow_radius));
  k.push_back(PL_KEY(double, "localizer.track.flow_desc_gate", "feature-flow descriptor gate", c.localizer.track.flow_desc_gate));
  k.push_back(PL_KEY(int, "localizer.lk.levels", "LK pyramid levels", c.localizer.track.lk.levels));
  k.push_back(PL_KEY(int, "localizer.lk.window", "LK window, px (odd)", c.localizer.track.lk.window));
  k.push_back(PL_KEY(int, "localizer.lk.max_iterations", "LK iterations per level", c.localizer.track.lk.max_iterations));
  k.push_back(PL_KEY(double, "localizer.lk.epsilon", "LK step convergence, px", c.localizer.track.lk.epsilon));
  k.push_back(PL_KEY(double, "localizer.lk.min_eigenvalue", "LK gradient energy floor", c.localizer.track.lk.min_eigenvalue));
  k.push_back(PL_KEY(double, "localizer.lk.fb_max", "LK forward-backward tolerance, px", c.localizer.track.lk.fb_max));
  k.push_back(PL_KEY(double, "localizer.optimize.sigma_pixel", "visual sigma, px", c.localizer.optimize.sigma_pixel));
  k.push_back(PL_KEY(double, "localizer.optimize.huber_pixel", "visual Huber threshold, px", c.localizer.optimize.huber_pixel));
  k.push_back(PL_KEY(double, "localizer.optimize.sigma_prior_t", "coarse-pose prior sigma, m", c.localizer.optimize.sigma_prior_t));
  k.push_back(PL_DEG("localizer.optimize.sigma_prior_r", "coarse-pose prior sigma, deg", c.localizer.optimize.sigma_prior_r));
  k.push_back(PL_KEY(double, "localizer.optimize.huber_prior", "prior Huber threshold, whitened", c.localizer.optimize.huber_prior));
  k.push_back(PL_KEY(double, "localizer.optimize.outlier_sigma", "outlier gate, multiples of sigma_pixel", c.localizer.optimize.outlier_sigma));
  k.push_back(PL_KEY(bool, "localizer.optimize.refit_inliers", "refit after dropping outliers", c.localizer.optimize.refit_inliers));
  k.push_back(PL_KEY(int, "localizer.optimize.max_iterations", "LM iterations", c.localizer.optimize.max_iterations));
  // features
  k.push_back(PL_KEY(std::string, "features.provider", "sidecar or classical", c.feature_provider));
  k.push_back(PL_KEY(int, "features.classical.levels", "detector pyramid levels", c.classical.levels));
  k.push_back(PL_KEY(int, "features.classical.max_keypoints", "keypoints per image", c.classical.max_keypoints));
  k.push_back(PL_KEY(double, "features.classical.min_response", "Shi-Tomasi threshold, intensity^2", c.classical.min_response));
  k.push_back(PL_KEY(int, "features.classical.nms_radius", "non-maximum suppression radius, px", c.classical.nms_radius));
  k.push_back(PL_KEY(int, "features.classical.patch_radius", "descriptor window half-size, px", c.classical.patch_radius));
  k.push_back(PL_KEY(int, "features.vocabulary_words", "global descriptor vocabulary size", c.vocabulary_words));
  k.push_back(PL_KEY(std::uint64_t, "features.vocabulary_seed", "vocabulary k-means seed", c.vocabulary_seed));
  // evaluation
  k.push_back(PL_KEY(double, "evaluate.tolerance", "timestamp association tolerance, s", c.trajectory_tolerance));
  return k;
}

#undef PL_KEY
#undef PL_DEG

}  // namespace

RunConfig::RunConfig() {
  // The synthetic fixture places surfaces on voxel centers of this grid.
  voxels = synth.voxels;
}

void RunConfig::validate() const {
  synth.validate();
  registration.validate();
  voxels.validate();
  mapping.sampling.validate();
  mapping.gaba.validate();
  localizer.validate();
  classical.validate();
  if (feature_provider != "sidecar" && feature_provider != "classical") {
    throw Error(ErrorCode::kConfig, "features.provider must be sidecar or classical");
  }
  if (!(reference_leaf_size > 0.0)) {
    throw Error(ErrorCode::kConfig, "registration.reference_leaf_size must be positive");
  }
  if (vocabulary_words < 1 || !(trajectory_tolerance > 0.0)) {
    throw Error(ErrorCode::kConfig, "invalid features or evaluate settings");
  }
}

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = build_keys();
  return keys;
}

namespace {

const ConfigKey& find_key(const std::string& key) {
  for (const ConfigKey& k : config_keys()) {
    if (k.key == key) return k;
  }
  throw Error(ErrorCode::kConfig, "unknown config key '" + key + "'");
}

std::pair<std::string, std::string> split_assignment(const std::string& line) {
  const auto eq = line.find('=');
  if (eq == std::string::npos) {
    throw Error(ErrorCode::kConfig, "expected 'key = value', got '" + line + "'");
  }
  return {trim(line.substr(0, eq)), trim(line.substr(eq + 1))};
}

}  // namespace

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto [key, value] = split_assignment(assignment);
  find_key(key).set(cfg, value);
  // Both PnP users share the localizer.pnp.* keys.
  cfg.localizer.track.pnp = cfg.localizer.reloc.pnp;
}

RunConfig parse_run_config(const std::string& text, const RunConfig& base) {
  RunConfig cfg = base;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    try {
      const auto [key, value] = split_assignment(line);
      if (!seen.insert(key).second) {
        throw Error(ErrorCode::kConfig, "repeated key '" + key + "'");
      }
      find_key(key).set(cfg, value);
    } catch (const Error& e) {
      throw Error(ErrorCode::kConfig, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  cfg.localizer.track.pnp = cfg.localizer.reloc.pnp;
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path, const RunConfig& base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), base);
}

std::string format_run_config(const RunConfig& cfg, bool with_docs) {
  std::string out;
  for (const ConfigKey& k : config_keys()) {
    if (with_docs) out += "# " + k.doc + "\n";
    out += k.key + " = " + k.get(cfg) + "\n";
  }
  return out;
}

std::uint64_t config_hash(const RunConfig& cfg) {
  const std::string text = format_run_config(cfg);
  return fnv1a64(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace priorloc
