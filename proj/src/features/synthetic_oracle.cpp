#include "priorloc/features/synthetic_oracle.hpp"

#include <random>

#include "priorloc/common/error.hpp"
#include "priorloc/common/random.hpp"

namespace priorloc {

void OracleConfig::validate() const {
  if (!(pixel_sigma >= 0.0) || !(descriptor_sigma >= 0.0) || global_dim < 1 ||
      !(min_depth > 0.0) || !(max_range > min_depth) || !(border >= 0.0)) {
    throw Error(ErrorCode::kConfig, "invalid oracle configuration");
  }
}

SyntheticOracle::SyntheticOracle(std::vector<Landmark> landmarks, Intrinsics K,
                                 std::vector<Pose> poses, OracleConfig cfg,
                                 VisibilityFn visible)
    : landmarks_(std::move(landmarks)),
      K_(K),
      poses_(std::move(poses)),
      cfg_(cfg),
      visible_(std::move(visible)) {
  cfg_.validate();
  K_.validate();
  for (const auto& lm : landmarks_) {
    if (landmarks_.front().descriptor.size() != lm.descriptor.size()) {
      throw Error(ErrorCode::kDimMismatch, "landmark descriptors differ in size");
    }
  }
  std::mt19937_64 rng(derive_seed({cfg_.seed, 0x9106a1ULL}));
  std::normal_distribution<double> n(0.0, 1.0);
  words_.resize(static_cast<Eigen::Index>(landmarks_.size()), cfg_.global_dim);
  for (Eigen::Index i = 0; i < words_.rows(); ++i) {
    for (Eigen::Index j = 0; j < words_.cols(); ++j) words_(i, j) = n(rng);
    words_.row(i).normalize();
  }
}

std::vector<std::size_t> SyntheticOracle::visible_landmarks(const Pose& T_wc) const {
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < landmarks_.size(); ++i) {
    const Vec3& p = landmarks_[i].position;
    const auto px = try_project(K_, T_wc, p, cfg_.min_depth);
    if (!px || !K_.in_image(*px, cfg_.border)) continue;
    if ((p - T_wc.translation()).norm() > cfg_.max_range) continue;
    if (visible_ && !visible_(T_wc.translation(), p)) continue;
    ids.push_back(i);
  }
  return ids;
}

Extraction SyntheticOracle::render(const Pose& T_wc, std::uint64_t stream_id) const {
  std::mt19937_64 rng(derive_seed({cfg_.seed, stream_id}));
  std::normal_distribution<double> n(0.0, 1.0);
  Extraction out;
  LocalFeatures& f = out.local;
  const auto ids = visible_landmarks(T_wc);
  const Eigen::Index dim = landmarks_.empty() ? 0 : landmarks_.front().descriptor.size();
  f.descriptors.resize(static_cast<Eigen::Index>(ids.size()), dim);
  out.global = GlobalDescriptor::Zero(cfg_.global_dim);
  Eigen::Index row = 0;
  for (std::size_t id : ids) {
    Vec2 px = project(K_, T_wc, landmarks_[id].position, cfg_.min_depth);
    // Both noise draws happen for every landmark so streams stay aligned.
    const Vec2 jitter(n(rng), n(rng));
    Eigen::VectorXd d = landmarks_[id].descriptor;
    Eigen::VectorXd dn(dim);
    for (Eigen::Index k = 0; k < dim; ++k) dn[k] = n(rng);
    if (cfg_.pixel_sigma > 0.0) px += cfg_.pixel_sigma * jitter;
    if (!K_.in_image(px)) continue;
    if (cfg_.descriptor_sigma > 0.0) d += cfg_.descriptor_sigma * dn;
    f.keypoints.push_back(px);
    f.descriptors.row(row++) = d.normalized().transpose();
    f.scores.push_back(1.0);
    f.landmark_ids.push_back(static_cast<std::int64_t>(id));
    out.global += words_.row(static_cast<Eigen::Index>(id)).transpose();
  }
  f.descriptors.conservativeResize(row, dim);
  const double norm = out.global.norm();
  if (norm > 0.0) {
    out.global /= norm;
  } else {
    out.global.setConstant(1.0 / std::sqrt(static_cast<double>(cfg_.global_dim)));
  }
  return out;
}

Extraction SyntheticOracle::extract(const FrameRef& frame) const {
  if (frame.id < 0 || static_cast<std::size_t>(frame.id) >= poses_.size()) {
    throw Error(ErrorCode::kProviderFailure,
                "frame id " + std::to_string(frame.id) + " unknown to the synthetic oracle");
  }
  return render(poses_[static_cast<std::size_t>(frame.id)],
                static_cast<std::uint64_t>(frame.id));
}

}  // namespace priorloc
