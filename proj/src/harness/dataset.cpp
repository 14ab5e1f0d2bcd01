#include "priorloc/harness/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "priorloc/common/error.hpp"
#include "priorloc/features/external_provider.hpp"
#include "priorloc/registration/cloud_io.hpp"

namespace priorloc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kDatasetFormat = 1;

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
}

/// `rel` resolved against `base_dir`; empty stays empty.
std::string resolve(const fs::path& base_dir, const std::string& rel) {
  if (rel.empty()) return {};
  const fs::path p(rel);
  return (p.is_absolute() ? p : base_dir / p).lexically_normal().string();
}

json pose_json(const Pose& T) {
  const Quat& q = T.rotation();
  const Vec3& t = T.translation();
  return {{"t", {t.x(), t.y(), t.z()}}, {"q", {q.w(), q.x(), q.y(), q.z()}}};
}

Pose pose_from_json(const json& j) {
  const auto t = j.at("t").get<std::vector<double>>();
  const auto q = j.at("q").get<std::vector<double>>();
  if (t.size() != 3 || q.size() != 4) throw Error(ErrorCode::kCorrupt, "pose needs t[3] and q[4]");
  return Pose(Quat(q[0], q[1], q[2], q[3]).normalized(), Vec3(t[0], t[1], t[2]));
}

std::string optional_string(const json& j, const char* key) {
  return j.contains(key) ? j.at(key).get<std::string>() : std::string();
}

std::vector<DatasetFrame> read_frames(const std::string& path) {
  const fs::path dir = fs::path(path).parent_path();
  std::istringstream in(read_text(path));
  std::vector<DatasetFrame> frames;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    DatasetFrame f;
    std::string image;
    if (!(fields >> f.index >> f.timestamp)) {
      throw Error(ErrorCode::kCorrupt, path + ":" + std::to_string(line_no) + ": bad frame line");
    }
    if (fields >> image) f.image = resolve(dir, image);
    if (!frames.empty() && f.timestamp <= frames.back().timestamp) {
      throw Error(ErrorCode::kCorrupt, path + ":" + std::to_string(line_no) +
                                           ": timestamps must increase");
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string frame_stem(std::int64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06lld", static_cast<long long>(index));
  return buf;
}

}  // namespace

const Sequence& Dataset::sequence(const std::string& name) const {
  for (const Sequence& s : sequences) {
    if (s.name == name) return s;
  }
  throw Error(ErrorCode::kConfig, "dataset has no sequence '" + name + "'");
}

std::vector<LidarScan> Dataset::load_scans() const {
  if (scans_file.empty()) throw Error(ErrorCode::kConfig, "dataset lists no scans");
  const fs::path dir = fs::path(scans_file).parent_path();
  std::istringstream in(read_text(scans_file));
  std::vector<LidarScan> scans;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    LidarScan scan;
    std::string cloud;
    if (!(fields >> scan.timestamp >> cloud)) {
      throw Error(ErrorCode::kCorrupt, scans_file + ": bad scan line '" + line + "'");
    }
    scan.points = read_point_cloud(resolve(dir, cloud));
    scans.push_back(std::move(scan));
  }
  if (scans.empty()) throw Error(ErrorCode::kConfig, scans_file + " lists no scans");
  return scans;
}

Dataset open_dataset(const std::string& dir) {
  const fs::path root = fs::path(dir);
  const std::string path = (root / "dataset.json").string();
  Dataset ds;
  ds.root = root.lexically_normal().string();
  try {
    const json j = json::parse(read_text(path));
    if (j.at("format").get<int>() != kDatasetFormat) {
      throw Error(ErrorCode::kVersionMismatch, path + ": unsupported format");
    }
    const json& cam = j.at("camera");
    ds.camera = Intrinsics{cam.at("fx").get<double>(),   cam.at("fy").get<double>(),
                           cam.at("cx").get<double>(),   cam.at("cy").get<double>(),
                           cam.at("width").get<int>(),   cam.at("height").get<int>()};
    ds.camera.validate();
    if (j.contains("T_cl")) ds.extrinsics.T_cl = pose_from_json(j.at("T_cl"));
    if (j.contains("initial_lidar_pose")) {
      ds.initial_lidar_pose = pose_from_json(j.at("initial_lidar_pose"));
    }
    ds.scans_file = resolve(root, optional_string(j, "scans"));
    ds.reference_file = resolve(root, optional_string(j, "reference"));
    ds.groundtruth_file = resolve(root, optional_string(j, "groundtruth"));
    ds.priors_file = resolve(root, optional_string(j, "priors"));
    for (const auto& [name, seq] : j.at("sequences").items()) {
      Sequence s;
      s.name = name;
      s.frames = read_frames(resolve(root, seq.at("frames").get<std::string>()));
      s.features_dir = resolve(root, optional_string(seq, "features"));
      ds.sequences.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kCorrupt, path + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfig) throw Error(ErrorCode::kCorrupt, path + ": " + e.what());
    throw;
  }
  return ds;
}

std::vector<std::string> write_synth_dataset(const SynthWorld& world, const std::string& dir) {
  const fs::path root(dir);
  std::error_code ec;
  for (const char* sub : {"scans", "mapping/features", "query/features"}) {
    fs::create_directories(root / sub, ec);
    if (ec) throw Error(ErrorCode::kIo, "cannot create " + (root / sub).string());
  }
  std::vector<std::string> files;
  const auto add = [&files](const std::string& rel) { files.push_back(rel); };

  std::string scan_list;
  std::int64_t scan_index = 0;
  for (const LidarScan& scan : world.scans()) {
    const std::string rel = "scans/" + frame_stem(scan_index++) + ".ply";
    write_ply((root / rel).string(), scan.points);
    scan_list += format_double(scan.timestamp) + " " + rel + "\n";
    add(rel);
  }
  write_text((root / "scans.txt").string(), scan_list);
  add("scans.txt");
  write_ply((root / "reference.ply").string(), world.reference_cloud());
  add("reference.ply");
  write_tum((root / "groundtruth.txt").string(), world.gt);
  add("groundtruth.txt");
  write_tum((root / "priors.txt").string(), world.priors);
  add("priors.txt");

  const SyntheticOracle oracle = world.oracle();
  for (const std::string seq : {"mapping", "query"}) {
    const std::uint64_t stream = seq == "mapping" ? 0 : kQueryStream;
    std::string frames;
    for (std::size_t i = 0; i < world.gt.size(); ++i) {
      const auto index = static_cast<std::int64_t>(i);
      const std::string rel = seq + "/features/" + frame_stem(index) + ".feat";
      write_feature_sidecar((root / rel).string(),
                            oracle.render(world.gt[i].pose, stream + i));
      frames += std::to_string(i) + " " + format_double(world.gt[i].timestamp) + "\n";
      add(rel);
    }
    write_text((root / seq / "frames.txt").string(), frames);
    add(seq + "/frames.txt");
  }

  const Intrinsics& K = world.cfg.camera;
  json j = {
      {"format", kDatasetFormat},
      {"camera",
       {{"fx", K.fx}, {"fy", K.fy}, {"cx", K.cx}, {"cy", K.cy}, {"width", K.width},
        {"height", K.height}}},
      {"T_cl", pose_json(world.cfg.extrinsics.T_cl)},
      {"initial_lidar_pose", pose_json(world.lidar_gt().front().pose)},
      {"scans", "scans.txt"},
      {"reference", "reference.ply"},
      {"groundtruth", "groundtruth.txt"},
      {"priors", "priors.txt"},
      {"sequences",
       {{"mapping", {{"frames", "mapping/frames.txt"}, {"features", "mapping/features"}}},
        {"query", {{"frames", "query/frames.txt"}, {"features", "query/features"}}}}}};
  write_text((root / "dataset.json").string(), j.dump(2) + "\n");
  add("dataset.json");
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace priorloc
