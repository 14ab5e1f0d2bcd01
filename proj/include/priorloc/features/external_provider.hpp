#pragma once

#include <string>

#include "priorloc/features/local_features.hpp"

namespace priorloc {

/// Sidecar layout (little endian): magic "PLFT", u32 version, u32 D, u32 G,
/// u32 N, then N records of (f32 u, f32 v, D x f32 descriptor, f32 score),
/// then G x f32 global descriptor.
inline constexpr std::uint32_t kSidecarVersion = 1;

void write_feature_sidecar(const std::string& path, const Extraction& ex);
/// Throws Io when unreadable, Corrupt or VersionMismatch on bad content.
/// Descriptors are renormalized after the float32 round trip.
Extraction read_feature_sidecar(const std::string& path);

/// Loads `<dir>/<stem>.feat`, where the stem is the image file name without
/// extension, or the zero-padded six-digit frame id when no path is given.
class ExternalProvider : public FeatureProvider {
 public:
  explicit ExternalProvider(std::string directory) : dir_(std::move(directory)) {}

  std::string name() const override { return "external"; }
  Extraction extract(const FrameRef& frame) const override;
  std::string sidecar_path(const FrameRef& frame) const;

 private:
  std::string dir_;
};

}  // namespace priorloc
