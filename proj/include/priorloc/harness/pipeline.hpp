#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "priorloc/features/classical_detector.hpp"
#include "priorloc/geometry/alignment.hpp"
#include "priorloc/harness/config.hpp"
#include "priorloc/harness/dataset.hpp"
#include "priorloc/mapper/map_io.hpp"

namespace priorloc {

/// Where build_map takes the camera priors from.
enum class PriorSource {
  kRegistration,  // scan registration against the reference cloud
  kDataset,       // the dataset's priors file
};

/// Parses "registration" or "dataset"; throws Config otherwise.
PriorSource parse_prior_source(const std::string& name);

struct BuildMapReport {
  std::size_t frames = 0;
  std::size_t keyframes = 0;
  std::size_t points = 0;
  std::size_t occupied_voxels = 0;
  std::size_t dropped_frames = 0;  // no prior at their timestamp
  double prior_seconds = 0.0;
  double extraction_seconds = 0.0;
  double reconstruction_seconds = 0.0;
  ReconstructionReport reconstruction;
};

struct BuiltMap {
  PriorMap map;
  /// Set when the classical provider trained one; localization needs it.
  std::optional<Vocabulary> vocabulary;
};

/// Voxels of `cfg` holding at least one cloud point, each updated once as a
/// hit, frozen.
VoxelMap voxelize_cloud(const std::vector<Vec3>& cloud, const VoxelMapConfig& cfg);

/// Camera priors for `sequence`, visual reconstruction on them, and the
/// voxelized reference cloud. Throws Config when an input the options need
/// is missing from the dataset.
BuiltMap build_map(const Dataset& dataset, const RunConfig& cfg, PriorSource source,
                   const std::string& sequence = "mapping", BuildMapReport* report = nullptr);

/// Vocabulary file: "PLVC" magic, u32 version, u32 words, u32 dim, words as
/// f64 rows, idf as f64.
void save_vocabulary(const std::string& path, const Vocabulary& vocab);
/// Throws Io, Corrupt or VersionMismatch.
Vocabulary load_vocabulary(const std::string& path);

/// The configured provider for a sequence. The classical provider needs
/// `vocabulary`; the sidecar provider needs the sequence's feature directory.
std::unique_ptr<FeatureProvider> make_provider(const RunConfig& cfg, const Sequence& sequence,
                                               const std::optional<Vocabulary>& vocabulary);

/// One localized frame, as logged.
struct FrameLog {
  std::int64_t index = 0;
  double timestamp = 0.0;
  bool ok = false;
  TrackMode mode = TrackMode::kRelocalizing;
  std::size_t inliers = 0;
  std::size_t tracked = 0;
  bool tracking_lost = false;
  std::optional<ErrorCode> error;
  double extraction_ms = 0.0;
  StageTimings timing;
};

/// One "key=value" record: frame, t, ok, mode, inliers, tracked, lost,
/// error, then extract/reloc/track/match/opt/reload/total milliseconds.
std::string format_frame_log(const FrameLog& log);

struct LocalizeReport {
  Trajectory trajectory;  // localized frames only
  std::vector<FrameLog> frames;
  std::size_t localized = 0;
  /// Frames after the first in Tracking mode.
  std::size_t tracking_after_first = 0;
  double mean_step_ms = 0.0;  // localize_step only, extraction excluded
};

/// Runs every frame of `sequence` through localize_step against the frozen
/// map. `on_frame` (optional) sees each record as it is produced.
LocalizeReport localize_sequence(const PriorMap& map, const Dataset& dataset,
                                 const RunConfig& cfg, const std::string& sequence,
                                 const std::optional<Vocabulary>& vocabulary = {},
                                 const std::function<void(const FrameLog&)>& on_frame = {});

/// Fixed-width APE/RPE summary.
std::string format_metrics_table(const TrajectoryMetrics& m);
/// "timestamp,ape_trans_m,ape_rot_deg" rows, one per associated pair.
std::string format_metrics_csv(const TrajectoryMetrics& m);
/// "frame,timestamp,mode,ok,inliers,tracked,extract_ms,...,total_ms" rows.
std::string format_timing_csv(const std::vector<FrameLog>& frames);

}  // namespace priorloc
