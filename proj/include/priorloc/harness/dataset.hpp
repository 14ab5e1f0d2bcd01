#pragma once

#include <optional>
#include <string>
#include <vector>

#include "priorloc/features/local_features.hpp"
#include "priorloc/harness/synth_world.hpp"
#include "priorloc/registration/prior_generation.hpp"

namespace priorloc {

/// One entry of a camera sequence.
struct DatasetFrame {
  std::int64_t index = 0;
  double timestamp = 0.0;
  std::string image;  // absolute path, empty when the sequence has no images
};

struct Sequence {
  std::string name;
  std::vector<DatasetFrame> frames;
  std::string features_dir;  // absolute, empty when the sequence has no sidecars
};

/// A dataset directory described by dataset.json:
///
///   {"format": 1,
///    "camera": {"fx", "fy", "cx", "cy", "width", "height"},
///    "T_cl": {"t": [x, y, z], "q": [w, x, y, z]},
///    "initial_lidar_pose": {"t": [...], "q": [...]},
///    "scans": "scans.txt", "reference": "reference.ply",
///    "groundtruth": "groundtruth.txt", "priors": "priors.txt",
///    "sequences": {"mapping": {"frames": "mapping/frames.txt",
///                              "features": "mapping/features"}, ...}}
///
/// frames.txt holds "index timestamp [image]" lines and scans.txt holds
/// "timestamp cloud" lines; paths are relative to the file that names them.
/// Clouds are PLY or PCD in the LiDAR frame. Trajectories are TUM files of
/// camera-to-world poses. Everything but camera and sequences is optional.
struct Dataset {
  std::string root;
  Intrinsics camera;
  Extrinsics extrinsics;
  std::optional<Pose> initial_lidar_pose;
  std::string scans_file;
  std::string reference_file;
  std::string groundtruth_file;
  std::string priors_file;
  std::vector<Sequence> sequences;

  /// Throws Config when the sequence is absent.
  const Sequence& sequence(const std::string& name) const;
  /// Loads every scan listed in scans_file. Throws Config when there is none.
  std::vector<LidarScan> load_scans() const;
};

/// Parses `<dir>/dataset.json`. Throws Io when unreadable and Corrupt on
/// malformed content.
Dataset open_dataset(const std::string& dir);

/// Stream offset separating query renders from the mapping renders.
inline constexpr std::uint64_t kQueryStream = 1ULL << 32;

/// Writes the world as a dataset: scans, reference cloud, ground truth,
/// noisy priors, and two oracle feature sequences along the ground-truth
/// loop ("mapping", and "query" with independent noise). Returns `dir`'s
/// file list relative to `dir`, sorted.
std::vector<std::string> write_synth_dataset(const SynthWorld& world, const std::string& dir);

}  // namespace priorloc
