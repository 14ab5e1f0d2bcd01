#pragma once

#include <vector>

#include "priorloc/features/image.hpp"
#include "priorloc/geometry/types.hpp"

namespace priorloc {

struct LkConfig {
  int levels = 3;
  int window = 21;  // odd, pixels
  int max_iterations = 30;
  double epsilon = 0.01;        // px, per-iteration convergence step
  double min_eigenvalue = 1e-3;  // per-pixel gradient energy, intensity^2
  double fb_max = 1.0;          // px, forward-backward tolerance

  void validate() const;
};

struct LkTrack {
  Vec2 point = Vec2::Zero();
  bool ok = false;
};

/// Pyramidal Lucas-Kanade with a forward-backward consistency check.
/// Throws SizeMismatch when the images differ in size.
std::vector<LkTrack> lk_track(const Image& prev, const Image& cur,
                              const std::vector<Vec2>& points, const LkConfig& cfg = {});

}  // namespace priorloc
