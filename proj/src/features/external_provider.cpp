#include "priorloc/features/external_provider.hpp"

#include <cstdio>
#include <filesystem>

#include "priorloc/common/binary_io.hpp"
#include "priorloc/common/error.hpp"

namespace priorloc {
namespace {

constexpr char kMagic[4] = {'P', 'L', 'F', 'T'};

}  // namespace

void write_feature_sidecar(const std::string& path, const Extraction& ex) {
  const LocalFeatures& f = ex.local;
  ByteWriter w;
  w.put_bytes(std::span(reinterpret_cast<const std::uint8_t*>(kMagic), 4));
  w.put<std::uint32_t>(kSidecarVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(f.descriptors.cols()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(ex.global.size()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(f.size()));
  for (std::size_t i = 0; i < f.size(); ++i) {
    w.put(static_cast<float>(f.keypoints[i].x()));
    w.put(static_cast<float>(f.keypoints[i].y()));
    for (Eigen::Index k = 0; k < f.descriptors.cols(); ++k) {
      w.put(static_cast<float>(f.descriptors(static_cast<Eigen::Index>(i), k)));
    }
    w.put(static_cast<float>(f.scores[i]));
  }
  for (Eigen::Index k = 0; k < ex.global.size(); ++k) w.put(static_cast<float>(ex.global[k]));
  write_file_bytes(path, w.bytes());
}

Extraction read_feature_sidecar(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  ByteReader r(bytes);
  const auto magic = r.get_bytes(4);
  if (!std::equal(magic.begin(), magic.end(), kMagic)) {
    throw Error(ErrorCode::kCorrupt, "bad sidecar magic in " + path);
  }
  const auto version = r.get<std::uint32_t>();
  if (version != kSidecarVersion) {
    throw Error(ErrorCode::kVersionMismatch, "sidecar version " + std::to_string(version));
  }
  const auto D = r.get<std::uint32_t>();
  const auto G = r.get<std::uint32_t>();
  const auto N = r.get<std::uint32_t>();
  const std::size_t need = static_cast<std::size_t>(N) * (3 + D) * 4 + static_cast<std::size_t>(G) * 4;
  if (r.remaining() != need) throw Error(ErrorCode::kCorrupt, "sidecar size mismatch in " + path);
  Extraction ex;
  LocalFeatures& f = ex.local;
  f.descriptors.resize(N, D);
  for (std::uint32_t i = 0; i < N; ++i) {
    const double u = r.get<float>();
    const double v = r.get<float>();
    f.keypoints.emplace_back(u, v);
    for (std::uint32_t k = 0; k < D; ++k) f.descriptors(i, k) = r.get<float>();
    const double n = f.descriptors.row(i).norm();
    if (!(n > 0.0)) throw Error(ErrorCode::kCorrupt, "zero descriptor in " + path);
    f.descriptors.row(i) /= n;
    f.scores.push_back(r.get<float>());
  }
  ex.global.resize(G);
  for (std::uint32_t k = 0; k < G; ++k) ex.global[k] = r.get<float>();
  const double gn = ex.global.norm();
  if (!(gn > 0.0)) throw Error(ErrorCode::kCorrupt, "zero global descriptor in " + path);
  ex.global /= gn;
  f.validate();
  return ex;
}

std::string ExternalProvider::sidecar_path(const FrameRef& frame) const {
  std::string stem;
  if (!frame.path.empty()) {
    stem = std::filesystem::path(frame.path).stem().string();
  } else {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%06lld", static_cast<long long>(frame.id));
    stem = buf;
  }
  return (std::filesystem::path(dir_) / (stem + ".feat")).string();
}

Extraction ExternalProvider::extract(const FrameRef& frame) const {
  const std::string path = sidecar_path(frame);
  try {
    return read_feature_sidecar(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::kProviderFailure, std::string("sidecar ") + path + ": " + e.what());
  }
}

}  // namespace priorloc
