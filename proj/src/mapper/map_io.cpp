#include "priorloc/mapper/map_io.hpp"

#include <cstring>

#include "priorloc/common/binary_io.hpp"

namespace priorloc {
namespace {

constexpr char kMagic[4] = {'P', 'L', 'M', 'P'};

enum Tag : std::uint32_t {
  kIntrinsics = 1,
  kKeyframes = 2,
  kPoints = 3,
  kCovisibility = 4,
  kGlobalIndex = 5,
  kVoxels = 6,
};

void put_vec(ByteWriter& w, const Eigen::Ref<const Eigen::VectorXd>& v) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(v.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) w.put(v[i]);
}

Eigen::VectorXd get_vec(ByteReader& r) {
  const auto n = r.get<std::uint32_t>();
  if (n > r.remaining() / sizeof(double)) throw Error(ErrorCode::kCorrupt, "vector length");
  Eigen::VectorXd v(n);
  for (std::uint32_t i = 0; i < n; ++i) v[i] = r.get<double>();
  return v;
}

void put_pose(ByteWriter& w, const Pose& T) {
  const Quat& q = T.rotation();
  for (double x : {q.w(), q.x(), q.y(), q.z()}) w.put(x);
  for (int i = 0; i < 3; ++i) w.put(T.translation()[i]);
}

Pose get_pose(ByteReader& r) {
  const double qw = r.get<double>(), qx = r.get<double>(), qy = r.get<double>(),
               qz = r.get<double>();
  Vec3 t;
  for (int i = 0; i < 3; ++i) t[i] = r.get<double>();
  return Pose(Quat(qw, qx, qy, qz), t);
}

void put_matrix(ByteWriter& w, const DescriptorMatrix& m) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.rows()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.size(); ++i) w.put(m.data()[i]);
}

DescriptorMatrix get_matrix(ByteReader& r) {
  const auto rows = r.get<std::uint32_t>();
  const auto cols = r.get<std::uint32_t>();
  const std::uint64_t n = std::uint64_t{rows} * cols;
  if (n > r.remaining() / sizeof(double)) throw Error(ErrorCode::kCorrupt, "matrix size");
  DescriptorMatrix m(rows, cols);
  for (std::uint64_t i = 0; i < n; ++i) m.data()[i] = r.get<double>();
  return m;
}

void put_features(ByteWriter& w, const LocalFeatures& f) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(f.size()));
  for (const auto& k : f.keypoints) {
    w.put(k.x());
    w.put(k.y());
  }
  put_matrix(w, f.descriptors);
  for (double s : f.scores) w.put(s);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(f.landmark_ids.size()));
  for (auto id : f.landmark_ids) w.put(id);
}

LocalFeatures get_features(ByteReader& r) {
  LocalFeatures f;
  const auto n = r.get<std::uint32_t>();
  if (n > r.remaining() / 16) throw Error(ErrorCode::kCorrupt, "keypoint count");
  f.keypoints.resize(n);
  for (auto& k : f.keypoints) {
    k.x() = r.get<double>();
    k.y() = r.get<double>();
  }
  f.descriptors = get_matrix(r);
  if (static_cast<std::uint32_t>(f.descriptors.rows()) != n) {
    throw Error(ErrorCode::kCorrupt, "descriptor rows");
  }
  f.scores.resize(n);
  for (auto& s : f.scores) s = r.get<double>();
  const auto m = r.get<std::uint32_t>();
  if (m > r.remaining() / 8) throw Error(ErrorCode::kCorrupt, "landmark id count");
  f.landmark_ids.resize(m);
  for (auto& id : f.landmark_ids) id = r.get<std::int64_t>();
  return f;
}

void put_section(ByteWriter& out, Tag tag, const ByteWriter& payload) {
  out.put<std::uint32_t>(tag);
  out.put<std::uint64_t>(payload.bytes().size());
  out.put_bytes(payload.bytes());
  out.put<std::uint64_t>(fnv1a64(payload.bytes()));
}

std::span<const std::uint8_t> get_section(ByteReader& in, Tag tag) {
  const auto got = in.get<std::uint32_t>();
  if (got != tag) throw Error(ErrorCode::kCorrupt, "unexpected section tag " + std::to_string(got));
  const auto len = in.get<std::uint64_t>();
  if (len > in.remaining()) throw Error(ErrorCode::kCorrupt, "section overruns file");
  const auto payload = in.get_bytes(len);
  if (in.get<std::uint64_t>() != fnv1a64(payload)) {
    throw Error(ErrorCode::kCorrupt, "section checksum mismatch");
  }
  return payload;
}

void expect_consumed(const ByteReader& r) {
  if (r.remaining() != 0) throw Error(ErrorCode::kCorrupt, "trailing bytes in section");
}

}  // namespace

std::vector<std::uint8_t> serialize_map(const VisualMap& map, const VoxelMap& voxels) {
  ByteWriter out;
  out.put_bytes(std::span(reinterpret_cast<const std::uint8_t*>(kMagic), 4));
  out.put<std::uint32_t>(kMapFormatVersion);

  {
    ByteWriter w;
    const Intrinsics& K = map.intrinsics();
    for (double x : {K.fx, K.fy, K.cx, K.cy}) w.put(x);
    w.put<std::int32_t>(K.width);
    w.put<std::int32_t>(K.height);
    put_section(out, kIntrinsics, w);
  }
  {
    ByteWriter w;
    w.put<std::uint32_t>(static_cast<std::uint32_t>(map.keyframe_count()));
    for (const auto& kf : map.keyframes()) {
      w.put(kf.id);
      w.put(kf.timestamp);
      w.put(kf.frame_index);
      put_pose(w, kf.pose);
      put_pose(w, kf.prior_pose);
      put_features(w, kf.features);
      put_vec(w, kf.global_desc);
      // point_of_keypoint is rebuilt from the point observers on load.
    }
    put_section(out, kKeyframes, w);
  }
  {
    ByteWriter w;
    w.put<std::uint32_t>(map.next_point_id());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(map.point_count()));
    for (const auto& [id, mp] : map.points()) {
      w.put(id);
      for (int i = 0; i < 3; ++i) w.put(mp.position[i]);
      put_vec(w, mp.descriptor);
      w.put<std::uint32_t>(static_cast<std::uint32_t>(mp.observers.size()));
      for (const auto& o : mp.observers) {
        w.put(o.keyframe);
        w.put(o.keypoint);
      }
    }
    put_section(out, kPoints, w);
  }
  {
    ByteWriter w;
    const auto& g = map.covisibility_graph();
    w.put<std::uint32_t>(static_cast<std::uint32_t>(g.size()));
    for (const auto& edges : g) {
      w.put<std::uint32_t>(static_cast<std::uint32_t>(edges.size()));
      for (const auto& [other, weight] : edges) {
        w.put(other);
        w.put<std::int32_t>(weight);
      }
    }
    put_section(out, kCovisibility, w);
  }
  {
    ByteWriter w;
    put_matrix(w, map.global_index());
    put_section(out, kGlobalIndex, w);
  }
  {
    ByteWriter w;
    voxels.serialize(w);
    put_section(out, kVoxels, w);
  }
  return out.take();
}

PriorMap deserialize_map(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes);
  const auto magic = in.get_bytes(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) {
    throw Error(ErrorCode::kCorrupt, "not a prior-map file");
  }
  const auto version = in.get<std::uint32_t>();
  if (version != kMapFormatVersion) {
    throw Error(ErrorCode::kVersionMismatch,
                "map format version " + std::to_string(version) + ", expected " +
                    std::to_string(kMapFormatVersion));
  }

  Intrinsics K;
  {
    ByteReader r(get_section(in, kIntrinsics));
    K.fx = r.get<double>();
    K.fy = r.get<double>();
    K.cx = r.get<double>();
    K.cy = r.get<double>();
    K.width = r.get<std::int32_t>();
    K.height = r.get<std::int32_t>();
    expect_consumed(r);
  }
  std::vector<Keyframe> kfs;
  {
    ByteReader r(get_section(in, kKeyframes));
    const auto n = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < n; ++i) {
      Keyframe kf;
      kf.id = r.get<KeyframeId>();
      if (kf.id != i) throw Error(ErrorCode::kCorrupt, "keyframe ids out of order");
      kf.timestamp = r.get<double>();
      kf.frame_index = r.get<std::int64_t>();
      kf.pose = get_pose(r);
      kf.prior_pose = get_pose(r);
      kf.features = get_features(r);
      kf.global_desc = get_vec(r);
      kf.point_of_keypoint.assign(kf.features.size(), kNoPoint);
      kfs.push_back(std::move(kf));
    }
    expect_consumed(r);
  }
  std::map<PointId, MapPoint> pts;
  PointId next_point = 0;
  {
    ByteReader r(get_section(in, kPoints));
    next_point = r.get<PointId>();
    const auto n = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < n; ++i) {
      MapPoint mp;
      mp.id = r.get<PointId>();
      for (int k = 0; k < 3; ++k) mp.position[k] = r.get<double>();
      mp.descriptor = get_vec(r);
      const auto m = r.get<std::uint32_t>();
      if (m > r.remaining() / 8) throw Error(ErrorCode::kCorrupt, "observer count");
      for (std::uint32_t k = 0; k < m; ++k) {
        Observation o{r.get<KeyframeId>(), r.get<std::uint32_t>()};
        if (o.keyframe >= kfs.size() || o.keypoint >= kfs[o.keyframe].point_of_keypoint.size()) {
          throw Error(ErrorCode::kCorrupt, "observer out of range");
        }
        auto& slot = kfs[o.keyframe].point_of_keypoint[o.keypoint];
        if (slot != kNoPoint) throw Error(ErrorCode::kCorrupt, "keypoint observed twice");
        slot = mp.id;
        mp.observers.push_back(o);
      }
      if (mp.id >= next_point || !pts.emplace(mp.id, std::move(mp)).second) {
        throw Error(ErrorCode::kCorrupt, "bad point id");
      }
    }
    expect_consumed(r);
  }
  std::vector<std::map<KeyframeId, int>> covis;
  {
    ByteReader r(get_section(in, kCovisibility));
    const auto n = r.get<std::uint32_t>();
    if (n > r.remaining() / 4) throw Error(ErrorCode::kCorrupt, "covisibility size");
    covis.resize(n);
    for (auto& edges : covis) {
      const auto m = r.get<std::uint32_t>();
      for (std::uint32_t k = 0; k < m; ++k) {
        const auto other = r.get<KeyframeId>();
        edges[other] = r.get<std::int32_t>();
      }
    }
    expect_consumed(r);
  }
  DescriptorMatrix index;
  {
    ByteReader r(get_section(in, kGlobalIndex));
    index = get_matrix(r);
    expect_consumed(r);
  }
  PriorMap out;
  {
    ByteReader r(get_section(in, kVoxels));
    out.voxels = VoxelMap::deserialize(r);
    expect_consumed(r);
  }
  if (in.remaining() != 0) throw Error(ErrorCode::kCorrupt, "trailing bytes after map");
  out.visual.restore(K, std::move(kfs), std::move(pts), std::move(covis), std::move(index),
                     next_point);
  out.visual.validate();
  return out;
}

void save_map(const std::string& path, const VisualMap& map, const VoxelMap& voxels) {
  write_file_bytes(path, serialize_map(map, voxels));
}

PriorMap load_map(const std::string& path) { return deserialize_map(read_file_bytes(path)); }

std::uint64_t map_hash(const VisualMap& map, const VoxelMap& voxels) {
  return fnv1a64(serialize_map(map, voxels));
}

}  // namespace priorloc
