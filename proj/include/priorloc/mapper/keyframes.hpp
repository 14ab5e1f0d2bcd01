#pragma once

#include <utility>
#include <vector>

#include "priorloc/geometry/trajectory.hpp"

namespace priorloc {

struct KeyframeSamplingConfig {
  double d_trans = 1.0;               // m
  double d_rot = 15.0 * kDegToRad;    // rad
  double co_trans = 5.0;              // m, co-observation pair gate
  double co_rot = 45.0 * kDegToRad;   // rad

  void validate() const;
};

struct KeyframeSelection {
  std::vector<std::size_t> indices;  // into the input trajectory
  /// Pairs (a, b), a < b, of positions in `indices` whose relative
  /// translation and rotation are both within the co-observation gates.
  std::vector<std::pair<std::size_t, std::size_t>> co_observing;
};

/// Greedy sampling: the first frame, then every frame whose translation or
/// rotation from the last emitted frame exceeds its threshold. The final
/// frame is also emitted when it is more than half a threshold away.
KeyframeSelection sample_keyframes(const Trajectory& cam_priors,
                                   const KeyframeSamplingConfig& cfg = {});

}  // namespace priorloc
