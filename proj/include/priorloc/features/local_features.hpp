#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "priorloc/features/image.hpp"
#include "priorloc/geometry/camera.hpp"

namespace priorloc {

/// One unit-norm descriptor per row.
using DescriptorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using GlobalDescriptor = Eigen::VectorXd;

struct LocalFeatures {
  std::vector<Vec2> keypoints;
  DescriptorMatrix descriptors;
  std::vector<double> scores;
  /// Ground-truth landmark per keypoint when the provider knows it (-1
  /// otherwise, or empty). Diagnostics only; no algorithm reads it.
  std::vector<std::int64_t> landmark_ids;

  std::size_t size() const { return keypoints.size(); }
  int dim() const { return static_cast<int>(descriptors.cols()); }

  /// Throws Corrupt when lengths disagree, a descriptor is not unit-norm
  /// within 1e-6, a score leaves [0,1], or (with `bounds`) a keypoint lies
  /// outside the image.
  void validate(const Intrinsics* bounds = nullptr) const;

  LocalFeatures subset(std::span<const std::size_t> indices) const;

  bool operator==(const LocalFeatures& other) const;
};

/// Throws Corrupt unless `g` is non-empty and unit-norm within 1e-6.
void validate_global(const GlobalDescriptor& g);

/// Cosine distance 1 - a.b between unit descriptors.
inline double descriptor_distance(const Eigen::Ref<const Eigen::VectorXd>& a,
                                  const Eigen::Ref<const Eigen::VectorXd>& b) {
  return 1.0 - a.dot(b);
}

/// Identifies a frame to a provider. Providers read the fields they need.
struct FrameRef {
  std::int64_t id = -1;
  double timestamp = 0.0;
  const Image* image = nullptr;
  std::string path;
};

struct Extraction {
  LocalFeatures local;
  GlobalDescriptor global;
};

class FeatureProvider {
 public:
  virtual ~FeatureProvider() = default;
  virtual std::string name() const = 0;
  /// Deterministic for a fixed provider and input. Throws ProviderFailure.
  virtual Extraction extract(const FrameRef& frame) const = 0;
};

}  // namespace priorloc
