#include "priorloc/harness/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <set>

#include "priorloc/common/binary_io.hpp"
#include "priorloc/common/error.hpp"
#include "priorloc/features/external_provider.hpp"
#include "priorloc/registration/cloud_io.hpp"
#include "priorloc/registration/cov_cloud.hpp"

namespace priorloc {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Prior timestamps are written with nine decimals.
constexpr double kTimestampMatch = 1e-6;

constexpr std::uint32_t kVocabMagic = 0x43564c50;  // "PLVC"
constexpr std::uint32_t kVocabVersion = 1;

FrameRef frame_ref(const DatasetFrame& f, const Image* image) {
  return FrameRef{f.index, f.timestamp, image, f.image};
}

Trajectory camera_priors(const Dataset& dataset, const RunConfig& cfg, PriorSource source,
                         const Sequence& seq) {
  if (source == PriorSource::kDataset) {
    if (dataset.priors_file.empty()) throw Error(ErrorCode::kConfig, "dataset has no priors file");
    return read_tum(dataset.priors_file);
  }
  if (dataset.reference_file.empty()) {
    throw Error(ErrorCode::kConfig, "registration needs a reference cloud");
  }
  const std::vector<Vec3> ref = read_point_cloud(dataset.reference_file);
  const CovCloud ref_map =
      compute_covariances(voxel_downsample(ref, cfg.reference_leaf_size),
                          cfg.registration.covariance_neighbors,
                          cfg.registration.covariance_epsilon);
  PriorGenerationConfig pg = cfg.registration;
  if (dataset.initial_lidar_pose) pg.initial_pose = *dataset.initial_lidar_pose;
  std::vector<double> times;
  for (const DatasetFrame& f : seq.frames) times.push_back(f.timestamp);
  return generate_priors(dataset.load_scans(), ref_map, times, dataset.extrinsics, pg).cam_priors;
}

}  // namespace

PriorSource parse_prior_source(const std::string& name) {
  if (name == "registration") return PriorSource::kRegistration;
  if (name == "dataset") return PriorSource::kDataset;
  throw Error(ErrorCode::kConfig, "prior source must be registration or dataset, got '" + name + "'");
}

VoxelMap voxelize_cloud(const std::vector<Vec3>& cloud, const VoxelMapConfig& cfg) {
  VoxelMap voxels(cfg);
  std::set<VoxelKey> keys;
  for (const Vec3& p : cloud) keys.insert(voxels.key_of(p));
  for (const VoxelKey& k : keys) voxels.update(k, true);
  voxels.freeze();
  return voxels;
}

BuiltMap build_map(const Dataset& dataset, const RunConfig& cfg, PriorSource source,
                   const std::string& sequence, BuildMapReport* report) {
  cfg.validate();
  BuildMapReport rep;
  const Sequence& seq = dataset.sequence(sequence);
  if (dataset.reference_file.empty()) {
    throw Error(ErrorCode::kConfig, "the structure factor needs a reference cloud");
  }

  auto t0 = Clock::now();
  const Trajectory priors = camera_priors(dataset, cfg, source, seq);
  rep.prior_seconds = seconds_since(t0);

  t0 = Clock::now();
  std::vector<MappingFrame> frames;
  for (const DatasetFrame& f : seq.frames) {
    const long j = priors.nearest(f.timestamp, kTimestampMatch);
    if (j < 0) {
      ++rep.dropped_frames;
      continue;
    }
    MappingFrame mf;
    mf.frame_index = f.index;
    mf.timestamp = f.timestamp;
    mf.prior = priors[static_cast<std::size_t>(j)].pose;
    frames.push_back(std::move(mf));
  }
  BuiltMap out;
  if (cfg.feature_provider == "classical") {
    // The vocabulary is trained on the mapping images themselves.
    const ClassicalDetector detector(cfg.classical);
    std::vector<DescriptorMatrix> sets;
    std::size_t next = 0;
    for (const DatasetFrame& f : seq.frames) {
      if (next >= frames.size() || frames[next].frame_index != f.index) continue;
      if (f.image.empty()) throw Error(ErrorCode::kConfig, "classical features need images");
      frames[next].extraction.local = detector.detect(read_image(f.image));
      sets.push_back(frames[next].extraction.local.descriptors);
      ++next;
    }
    out.vocabulary = train_vocabulary(sets, cfg.vocabulary_words, cfg.vocabulary_seed);
    for (MappingFrame& mf : frames) {
      mf.extraction.global = out.vocabulary->bag(mf.extraction.local.descriptors);
    }
  } else {
    const auto provider = make_provider(cfg, seq, {});
    std::size_t next = 0;
    for (const DatasetFrame& f : seq.frames) {
      if (next >= frames.size() || frames[next].frame_index != f.index) continue;
      frames[next++].extraction = provider->extract(frame_ref(f, nullptr));
    }
  }
  rep.extraction_seconds = seconds_since(t0);

  t0 = Clock::now();
  out.map.voxels = voxelize_cloud(read_point_cloud(dataset.reference_file), cfg.voxels);
  out.map.visual =
      reconstruct(frames, dataset.camera, &out.map.voxels, cfg.mapping, &rep.reconstruction);
  rep.reconstruction_seconds = seconds_since(t0);

  rep.frames = frames.size();
  rep.keyframes = out.map.visual.keyframe_count();
  rep.points = out.map.visual.point_count();
  rep.occupied_voxels = out.map.voxels.occupied_count();
  if (report) *report = rep;
  return out;
}

void save_vocabulary(const std::string& path, const Vocabulary& vocab) {
  ByteWriter w;
  w.put<std::uint32_t>(kVocabMagic);
  w.put<std::uint32_t>(kVocabVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(vocab.words.rows()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(vocab.words.cols()));
  for (Eigen::Index i = 0; i < vocab.words.size(); ++i) w.put<double>(vocab.words.data()[i]);
  for (Eigen::Index i = 0; i < vocab.idf.size(); ++i) w.put<double>(vocab.idf[i]);
  write_file_bytes(path, w.bytes());
}

Vocabulary load_vocabulary(const std::string& path) {
  const std::vector<std::uint8_t> bytes = read_file_bytes(path);
  ByteReader r(bytes);
  if (r.get<std::uint32_t>() != kVocabMagic) throw Error(ErrorCode::kCorrupt, path + ": bad magic");
  if (r.get<std::uint32_t>() != kVocabVersion) {
    throw Error(ErrorCode::kVersionMismatch, path + ": unsupported vocabulary version");
  }
  const auto words = r.get<std::uint32_t>();
  const auto dim = r.get<std::uint32_t>();
  Vocabulary v;
  v.words.resize(words, dim);
  v.idf.resize(words);
  for (Eigen::Index i = 0; i < v.words.size(); ++i) v.words.data()[i] = r.get<double>();
  for (Eigen::Index i = 0; i < v.idf.size(); ++i) v.idf[i] = r.get<double>();
  if (r.remaining() != 0) throw Error(ErrorCode::kCorrupt, path + ": trailing bytes");
  return v;
}

std::unique_ptr<FeatureProvider> make_provider(const RunConfig& cfg, const Sequence& sequence,
                                               const std::optional<Vocabulary>& vocabulary) {
  if (cfg.feature_provider == "classical") {
    if (!vocabulary) throw Error(ErrorCode::kConfig, "classical features need a vocabulary");
    return std::make_unique<ClassicalDetector>(cfg.classical, *vocabulary);
  }
  if (sequence.features_dir.empty()) {
    throw Error(ErrorCode::kConfig, "sequence '" + sequence.name + "' has no feature sidecars");
  }
  return std::make_unique<ExternalProvider>(sequence.features_dir);
}

std::string format_frame_log(const FrameLog& log) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "frame=%lld t=%.6f ok=%d mode=%s inliers=%zu tracked=%zu lost=%d error=%s "
                "extract_ms=%.3f reloc_ms=%.3f track_ms=%.3f match_ms=%.3f opt_ms=%.3f "
                "reload_ms=%.3f total_ms=%.3f",
                static_cast<long long>(log.index), log.timestamp, log.ok ? 1 : 0,
                mode_name(log.mode), log.inliers, log.tracked, log.tracking_lost ? 1 : 0,
                log.error ? std::string(error_name(*log.error)).c_str() : "none",
                log.extraction_ms, log.timing.relocalization, log.timing.tracking,
                log.timing.map_matching, log.timing.optimization, log.timing.reload,
                log.timing.total);
  return buf;
}

LocalizeReport localize_sequence(const PriorMap& map, const Dataset& dataset,
                                 const RunConfig& cfg, const std::string& sequence,
                                 const std::optional<Vocabulary>& vocabulary,
                                 const std::function<void(const FrameLog&)>& on_frame) {
  cfg.validate();
  const Intrinsics& K = map.visual.intrinsics();
  if (!(K == dataset.camera)) {
    throw Error(ErrorCode::kConfig, "dataset camera differs from the map's intrinsics");
  }
  const Sequence& seq = dataset.sequence(sequence);
  const auto provider = make_provider(cfg, seq, vocabulary);

  LocalizeReport report;
  TrackState state;
  double step_ms = 0.0;
  for (const DatasetFrame& f : seq.frames) {
    const auto t0 = Clock::now();
    Image image;
    if (!f.image.empty()) image = read_image(f.image);
    LocFrame frame{f.index, f.timestamp, provider->extract(frame_ref(f, image.empty() ? nullptr : &image)),
                   image.empty() ? nullptr : &image};
    FrameLog log;
    log.extraction_ms = seconds_since(t0) * 1e3;
    const LocResult r = localize_step(state, frame, map.visual, K, cfg.localizer);
    log.index = f.index;
    log.timestamp = f.timestamp;
    log.ok = r.ok;
    log.mode = r.mode;
    log.inliers = r.inliers;
    log.tracked = r.tracked;
    log.tracking_lost = r.tracking_lost;
    log.error = r.error;
    log.timing = r.timing;
    step_ms += r.timing.total;
    if (r.ok) {
      report.trajectory.push_back(f.timestamp, r.pose);
      ++report.localized;
      if (!report.frames.empty() && r.mode == TrackMode::kTracking) ++report.tracking_after_first;
    }
    if (on_frame) on_frame(log);
    report.frames.push_back(log);
  }
  if (!report.frames.empty()) step_ms /= static_cast<double>(report.frames.size());
  report.mean_step_ms = step_ms;
  return report;
}

std::string format_metrics_table(const TrajectoryMetrics& m) {
  char buf[1024];
  std::snprintf(buf, sizeof buf,
                "metric                 value\n"
                "pairs                  %zu\n"
                "ape_trans_mean_m       %.9f\n"
                "ape_trans_rmse_m       %.9f\n"
                "ape_trans_max_m        %.9f\n"
                "ape_rot_mean_deg       %.9f\n"
                "ape_rot_rmse_deg       %.9f\n"
                "rpe_trans_mean_m       %.9f\n"
                "rpe_trans_rmse_m       %.9f\n"
                "rpe_rot_mean_deg       %.9f\n",
                m.pairs, m.ape_trans_mean, m.ape_trans_rmse, m.ape_trans_max, m.ape_rot_mean,
                m.ape_rot_rmse, m.rpe_trans_mean, m.rpe_trans_rmse, m.rpe_rot_mean);
  return buf;
}

std::string format_metrics_csv(const TrajectoryMetrics& m) {
  std::string out = "timestamp,ape_trans_m,ape_rot_deg\n";
  char buf[128];
  for (std::size_t i = 0; i < m.timestamps.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.9f,%.9f,%.9f\n", m.timestamps[i], m.ape_trans[i],
                  m.ape_rot[i]);
    out += buf;
  }
  return out;
}

std::string format_timing_csv(const std::vector<FrameLog>& frames) {
  std::string out =
      "frame,timestamp,mode,ok,inliers,tracked,extract_ms,reloc_ms,track_ms,match_ms,opt_ms,"
      "reload_ms,total_ms\n";
  char buf[256];
  for (const FrameLog& f : frames) {
    std::snprintf(buf, sizeof buf, "%lld,%.9f,%s,%d,%zu,%zu,%.3f,%.3f,%.3f,%.3f,%.3f,%.3f,%.3f\n",
                  static_cast<long long>(f.index), f.timestamp, mode_name(f.mode), f.ok ? 1 : 0,
                  f.inliers, f.tracked, f.extraction_ms, f.timing.relocalization,
                  f.timing.tracking, f.timing.map_matching, f.timing.optimization,
                  f.timing.reload, f.timing.total);
    out += buf;
  }
  return out;
}

}  // namespace priorloc
