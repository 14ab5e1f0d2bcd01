#include "priorloc/mapper/reconstruction.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "priorloc/common/error.hpp"

namespace priorloc {

void ReconstructionConfig::validate() const {
  sampling.validate();
  gaba.validate();
  if (!(extend_reprojection > 0) || local_window < 1 || global_every < 0) {
    throw Error(ErrorCode::kConfig, "invalid reconstruction configuration");
  }
}

namespace {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<std::size_t> parent_;
};

struct Track {
  std::vector<Observation> obs;  // sorted by keyframe
  std::int64_t point = -1;
};

Observation observation_in(const Track& tr, KeyframeId k) {
  return *std::find_if(tr.obs.begin(), tr.obs.end(),
                       [&](const Observation& o) { return o.keyframe == k; });
}

// Pose-only refinement of a new keyframe against the existing points its
// tracks reach, so that gating and triangulation see a consistent pose.
void refine_new_keyframe(VisualMap& map, KeyframeId k, const std::vector<Track>& tracks,
                         const std::vector<std::size_t>& mine, const GabaConfig& g) {
  Keyframe& kf = map.keyframe(k);
  BundleProblem pb;
  pb.K = map.intrinsics();
  pb.add_pose(kf.pose);
  for (std::size_t t : mine) {
    const Track& tr = tracks[t];
    if (tr.point < 0 || !map.has_point(static_cast<PointId>(tr.point))) continue;
    const std::size_t j = pb.add_point(map.point(static_cast<PointId>(tr.point)).position, true);
    pb.visual.push_back({0, j, kf.features.keypoints[observation_in(tr, k).keypoint],
                         g.sigma_visual, Huber{g.huber_visual / g.sigma_visual}});
  }
  if (g.use_prior) {
    pb.priors.push_back({0, kf.prior_pose, g.sigma_prior_t, g.sigma_prior_r, Huber{g.huber_prior}});
  } else if (pb.visual.size() < 6) {
    return;
  }
  if (pb.visual.empty()) return;
  solve_bundle(pb, LmConfig{.max_iterations = 10});
  kf.pose = pb.poses[0];
}

}  // namespace

VisualMap reconstruct(std::span<const MappingFrame> frames, const Intrinsics& K,
                      const VoxelMap* voxels, const ReconstructionConfig& cfg,
                      ReconstructionReport* report) {
  cfg.validate();
  ReconstructionReport rep;
  if (frames.size() < 2) {
    throw Error(ErrorCode::kReconstructionFailed, "need at least two mapping frames");
  }
  Trajectory priors;
  for (const auto& f : frames) priors.push_back(f.timestamp, f.prior);
  const KeyframeSelection sel = sample_keyframes(priors, cfg.sampling);
  if (sel.indices.size() < 2) {
    throw Error(ErrorCode::kReconstructionFailed, "fewer than two keyframes sampled");
  }

  VisualMap map(K);
  std::vector<std::size_t> offset;
  std::size_t total = 0;
  for (std::size_t idx : sel.indices) {
    const MappingFrame& f = frames[idx];
    Keyframe kf;
    kf.timestamp = f.timestamp;
    kf.frame_index = f.frame_index;
    kf.pose = f.prior;
    kf.prior_pose = f.prior;
    kf.features = f.extraction.local;
    kf.global_desc = f.extraction.global;
    offset.push_back(total);
    total += kf.features.size();
    map.add_keyframe(std::move(kf));
  }
  rep.keyframes = map.keyframe_count();

  // Chain pairwise matches into tracks.
  UnionFind uf(total);
  for (const auto& [a, b] : sel.co_observing) {
    const auto matches =
        match_descriptors(map.keyframe(a).features, map.keyframe(b).features, cfg.matching);
    if (!matches.empty()) ++rep.matched_pairs;
    for (const auto& [i, j] : matches) uf.unite(offset[a] + i, offset[b] + j);
  }
  std::map<std::size_t, std::vector<Observation>> groups;
  for (KeyframeId k = 0; k < map.keyframe_count(); ++k) {
    const std::size_t n = map.keyframe(k).features.size();
    for (std::uint32_t i = 0; i < n; ++i) {
      groups[uf.find(offset[k] + i)].push_back({k, i});
    }
  }
  std::vector<Track> tracks;
  for (auto& [root, obs] : groups) {
    if (obs.size() < 2) continue;
    std::sort(obs.begin(), obs.end());
    bool conflict = false;
    for (std::size_t i = 1; i < obs.size(); ++i) {
      if (obs[i].keyframe == obs[i - 1].keyframe) conflict = true;
    }
    if (conflict) {
      ++rep.conflicting_tracks;
      continue;
    }
    tracks.push_back({std::move(obs), -1});
  }
  rep.tracks = tracks.size();

  std::vector<std::vector<std::size_t>> tracks_of(map.keyframe_count());
  for (std::size_t t = 0; t < tracks.size(); ++t) {
    for (const auto& o : tracks[t].obs) tracks_of[o.keyframe].push_back(t);
  }

  GabaConfig local = cfg.gaba;
  local.rounds = 1;
  local.cull_outliers = false;
  local.use_structure = local.use_structure && cfg.incremental_structure;
  const GabaConfig& periodic = local;

  for (KeyframeId k = 0; k < map.keyframe_count(); ++k) {
    refine_new_keyframe(map, k, tracks, tracks_of[k], cfg.gaba);
    const Keyframe& kf = map.keyframe(k);
    for (std::size_t t : tracks_of[k]) {
      Track& tr = tracks[t];
      const auto self = std::find_if(tr.obs.begin(), tr.obs.end(),
                                     [&](const Observation& o) { return o.keyframe == k; });
      if (tr.point >= 0) {
        if (!map.has_point(static_cast<PointId>(tr.point))) continue;
        const auto px = try_project(K, kf.pose, map.point(tr.point).position);
        if (px && (*px - kf.features.keypoints[self->keypoint]).norm() <= cfg.extend_reprojection) {
          map.add_observation(static_cast<PointId>(tr.point), *self);
          ++rep.extended_observations;
        }
        continue;
      }
      std::vector<TriangulationObservation> views;
      std::vector<Observation> used;
      for (const auto& o : tr.obs) {
        if (o.keyframe > k) break;
        const Keyframe& v = map.keyframe(o.keyframe);
        views.push_back({v.pose, K, v.features.keypoints[o.keypoint]});
        used.push_back(o);
      }
      if (views.size() < 2) continue;
      try {
        const Vec3 p = triangulate(views, cfg.triangulation);
        tr.point = map.add_point(p, used);
        ++rep.triangulated;
      } catch (const Error& e) {
        switch (e.code()) {
          case ErrorCode::kInsufficientParallax: ++rep.rejected_parallax; break;
          case ErrorCode::kCheiralityViolation: ++rep.rejected_cheirality; break;
          case ErrorCode::kLargeReprojection: ++rep.rejected_reprojection; break;
          default: throw;
        }
      }
    }

    if (cfg.local_gaba && map.point_count() > 0 && k > 0) {
      GabaWindow window;
      const KeyframeId first = k + 1 >= static_cast<KeyframeId>(cfg.local_window)
                                   ? k + 1 - cfg.local_window
                                   : 0;
      for (KeyframeId w = first; w <= k; ++w) window.free_keyframes.insert(w);
      gaba(map, voxels, local, &window);
    }
    if (cfg.global_every > 0 && k > 0 && (k + 1) % cfg.global_every == 0 &&
        k + 1 < map.keyframe_count() && map.point_count() > 0) {
      gaba(map, voxels, periodic);
    }
  }

  if (map.point_count() == 0) {
    throw Error(ErrorCode::kReconstructionFailed, "no track survived triangulation");
  }
  rep.final_gaba = gaba(map, voxels, cfg.gaba);

  std::vector<PointId> weak;
  for (const auto& [id, mp] : map.points()) {
    if (mp.observers.size() < 2) weak.push_back(id);
  }
  for (PointId id : weak) map.remove_point(id);
  if (map.point_count() == 0) {
    throw Error(ErrorCode::kReconstructionFailed, "every point was culled");
  }
  map.finalize();
  if (report) *report = std::move(rep);
  return map;
}

}  // namespace priorloc
