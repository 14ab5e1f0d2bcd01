#include "priorloc/mapper/keyframes.hpp"

#include "priorloc/common/error.hpp"

namespace priorloc {

void KeyframeSamplingConfig::validate() const {
  if (!(d_trans > 0.0) || !(d_rot > 0.0) || !(co_trans >= 0.0) || !(co_rot >= 0.0)) {
    throw Error(ErrorCode::kConfig, "invalid keyframe sampling thresholds");
  }
}

KeyframeSelection sample_keyframes(const Trajectory& traj, const KeyframeSamplingConfig& cfg) {
  cfg.validate();
  KeyframeSelection sel;
  if (traj.empty()) return sel;
  const auto dist = [&](std::size_t a, std::size_t b) {
    return (traj[a].pose.translation() - traj[b].pose.translation()).norm();
  };
  const auto angle = [&](std::size_t a, std::size_t b) {
    return rotation_angle(traj[a].pose.rotation(), traj[b].pose.rotation());
  };
  sel.indices.push_back(0);
  for (std::size_t i = 1; i < traj.size(); ++i) {
    const std::size_t last = sel.indices.back();
    if (dist(last, i) > cfg.d_trans || angle(last, i) > cfg.d_rot) sel.indices.push_back(i);
  }
  const std::size_t end = traj.size() - 1;
  if (sel.indices.back() != end) {
    const std::size_t last = sel.indices.back();
    if (dist(last, end) > 0.5 * cfg.d_trans || angle(last, end) > 0.5 * cfg.d_rot) {
      sel.indices.push_back(end);
    }
  }
  for (std::size_t a = 0; a < sel.indices.size(); ++a) {
    for (std::size_t b = a + 1; b < sel.indices.size(); ++b) {
      if (dist(sel.indices[a], sel.indices[b]) <= cfg.co_trans &&
          angle(sel.indices[a], sel.indices[b]) <= cfg.co_rot) {
        sel.co_observing.emplace_back(a, b);
      }
    }
  }
  return sel;
}

}  // namespace priorloc
