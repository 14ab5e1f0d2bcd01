#pragma once

#include <functional>
#include <vector>

#include "priorloc/features/local_features.hpp"

namespace priorloc {

struct Landmark {
  Vec3 position;
  Eigen::VectorXd descriptor;  // unit norm
};

struct OracleConfig {
  double pixel_sigma = 0.0;       // px
  double descriptor_sigma = 0.0;  // per component, before renormalization
  int global_dim = 256;
  double min_depth = 0.1;  // m
  double max_range = 30.0;  // m
  double border = 0.0;  // px
  std::uint64_t seed = 1;

  void validate() const;
};

/// Returns true when the segment from `eye` to `point` is unobstructed.
using VisibilityFn = std::function<bool(const Vec3& eye, const Vec3& point)>;

/// Renders known landmarks into frames with known poses. Frame ids index
/// `poses`. Keypoints are the landmark projections plus seeded pixel noise
/// (exact projections at zero noise); descriptors are the landmark
/// descriptors plus seeded noise. The global descriptor is the normalized
/// sum of a fixed random vector per visible landmark.
class SyntheticOracle : public FeatureProvider {
 public:
  SyntheticOracle(std::vector<Landmark> landmarks, Intrinsics K, std::vector<Pose> poses,
                  OracleConfig cfg = {}, VisibilityFn visible = {});

  std::string name() const override { return "synthetic"; }
  Extraction extract(const FrameRef& frame) const override;
  /// Renders an arbitrary pose; `stream_id` selects the noise stream.
  Extraction render(const Pose& T_wc, std::uint64_t stream_id) const;

  /// Landmark ids visible from `T_wc`, ascending.
  std::vector<std::size_t> visible_landmarks(const Pose& T_wc) const;

  const std::vector<Landmark>& landmarks() const { return landmarks_; }
  const Intrinsics& intrinsics() const { return K_; }

 private:
  std::vector<Landmark> landmarks_;
  Intrinsics K_;
  std::vector<Pose> poses_;
  OracleConfig cfg_;
  VisibilityFn visible_;
  DescriptorMatrix words_;  // one random unit vector per landmark
};

}  // namespace priorloc
