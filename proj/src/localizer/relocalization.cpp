#include "priorloc/localizer/relocalization.hpp"

#include <algorithm>
#include <optional>
#include <set>

#include "priorloc/common/error.hpp"

namespace priorloc {

void RelocConfig::validate() const {
  if (k == 0 || w_min < 0 || min_matches < 4 || min_inliers < 4) {
    throw Error(ErrorCode::kConfig, "relocalization: invalid configuration");
  }
  pnp.validate();
}

std::vector<KeyframeId> covisibility_cluster(const VisualMap& map, KeyframeId seed, int w_min) {
  std::vector<KeyframeId> out{seed};
  for (const auto& [kf, w] : map.covisible(seed, w_min)) out.push_back(kf);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<PointId> cluster_points(const VisualMap& map, const std::vector<KeyframeId>& cluster) {
  std::set<PointId> ids;
  for (KeyframeId kf : cluster) {
    for (std::int64_t p : map.keyframe(kf).point_of_keypoint) {
      if (p != kNoPoint) ids.insert(static_cast<PointId>(p));
    }
  }
  return {ids.begin(), ids.end()};
}

RelocResult relocalize(const LocalFeatures& feats, const GlobalDescriptor& gdesc,
                       const VisualMap& map, const Intrinsics& K, const RelocConfig& cfg) {
  cfg.validate();
  const std::vector<RetrievalHit> hits = map.retrieve(gdesc, cfg.k, cfg.min_similarity);
  if (hits.empty()) throw Error(ErrorCode::kRetrievalEmpty, "no keyframe passed retrieval");

  PnpConfig pnp = cfg.pnp;
  pnp.min_inliers = cfg.min_inliers;
  std::set<std::vector<KeyframeId>> tried;
  std::optional<RelocResult> best;
  std::size_t best_inliers = 0;
  std::size_t most_matches = 0;
  for (const RetrievalHit& hit : hits) {
    std::vector<KeyframeId> cluster = covisibility_cluster(map, hit.keyframe, cfg.w_min);
    if (!tried.insert(cluster).second) continue;
    const std::vector<PointId> ids = cluster_points(map, cluster);
    if (ids.empty() || feats.size() == 0) continue;
    DescriptorMatrix D(static_cast<Eigen::Index>(ids.size()), feats.dim());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      D.row(static_cast<Eigen::Index>(i)) = map.point(ids[i]).descriptor.transpose();
    }
    const std::vector<Match> matches = match_descriptors(feats.descriptors, D, cfg.matching);
    most_matches = std::max(most_matches, matches.size());
    if (matches.size() < cfg.min_matches) continue;
    std::vector<Correspondence> corrs;
    corrs.reserve(matches.size());
    for (const auto& [q, m] : matches) corrs.push_back({feats.keypoints[q], map.point(ids[m]).position});
    PnpResult pr;
    try {
      pr = pnp_ransac(corrs, K, pnp);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kRansacFailed) throw;
      continue;
    }
    if (best && pr.inlier_count <= best_inliers) continue;
    RelocResult r;
    r.pose = pr.pose;
    r.keyframe = hit.keyframe;
    r.cluster = std::move(cluster);
    r.candidates = corrs.size();
    for (std::size_t i = 0; i < matches.size(); ++i) {
      if (!pr.inlier[i]) continue;
      const auto& [q, m] = matches[i];
      r.associations.push_back(
          {q, ids[m],
           descriptor_distance(feats.descriptors.row(static_cast<Eigen::Index>(q)).transpose(),
                               D.row(static_cast<Eigen::Index>(m)).transpose())});
    }
    best_inliers = pr.inlier_count;
    best = std::move(r);
  }
  if (best) return *best;
  if (most_matches < cfg.min_matches) {
    throw Error(ErrorCode::kInsufficientMatches,
                "relocalization: best cluster gave " + std::to_string(most_matches) + " matches");
  }
  throw Error(ErrorCode::kRansacFailed, "relocalization: no cluster reached " +
                                            std::to_string(cfg.min_inliers) + " inliers");
}

}  // namespace priorloc
