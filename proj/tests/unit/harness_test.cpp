#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "priorloc/common/error.hpp"
#include "priorloc/features/external_provider.hpp"
#include "priorloc/harness/config.hpp"
#include "priorloc/harness/dataset.hpp"
#include "priorloc/harness/manifest.hpp"
#include "priorloc/harness/pipeline.hpp"

namespace fs = std::filesystem;

namespace priorloc {
namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kInternal;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("priorloc_harness_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

SynthConfig small_world() {
  SynthConfig cfg;
  cfg.frames = 40;
  cfg.landmarks = 600;
  return cfg;
}

TEST(RunConfig, FormattedDefaultsParseBackExactly) {
  const RunConfig defaults;
  const std::string text = format_run_config(defaults, true);
  const RunConfig parsed = parse_run_config(text);
  EXPECT_EQ(format_run_config(parsed), format_run_config(defaults));
  EXPECT_EQ(config_hash(parsed), config_hash(defaults));
}

TEST(RunConfig, EveryKeyIsDocumentedAndUnique) {
  std::set<std::string> keys;
  for (const ConfigKey& k : config_keys()) {
    EXPECT_FALSE(k.doc.empty()) << k.key;
    EXPECT_TRUE(keys.insert(k.key).second) << k.key;
  }
  EXPECT_GT(keys.size(), 80u);
}

TEST(RunConfig, UnknownRepeatedAndMalformedEntriesAreRejected) {
  EXPECT_EQ(code_of([] { parse_run_config("no.such.key = 1\n"); }), ErrorCode::kConfig);
  EXPECT_EQ(code_of([] { parse_run_config("synth.frames = 10\nsynth.frames = 20\n"); }),
            ErrorCode::kConfig);
  EXPECT_EQ(code_of([] { parse_run_config("synth.frames = ten\n"); }), ErrorCode::kConfig);
  EXPECT_EQ(code_of([] { parse_run_config("synth.frames\n"); }), ErrorCode::kConfig);
  EXPECT_EQ(code_of([] { parse_run_config("mapping.local_gaba = maybe\n"); }),
            ErrorCode::kConfig);
  EXPECT_EQ(code_of([] { parse_run_config("voxels.origin = 1,2\n"); }), ErrorCode::kConfig);
  EXPECT_EQ(code_of([] { parse_run_config("features.provider = learned\n"); }),
            ErrorCode::kConfig);
  EXPECT_EQ(code_of([] { parse_run_config("voxels.resolution = -1\n"); }), ErrorCode::kConfig);
}

TEST(RunConfig, ValuesCommentsAndUnits) {
  const RunConfig cfg = parse_run_config(
      "# comment line\n"
      "synth.frames = 120   # trailing comment\n"
      "voxels.origin = 0.5, -1, 2\n"
      "mapping.keyframes.d_rot = 30\n"
      "localizer.pnp.seed = 7\n"
      "mapping.local_gaba = false\n");
  EXPECT_EQ(cfg.synth.frames, 120u);
  EXPECT_EQ(cfg.voxels.origin, Vec3(0.5, -1, 2));
  EXPECT_DOUBLE_EQ(cfg.mapping.sampling.d_rot, 30 * kDegToRad);
  EXPECT_EQ(cfg.localizer.reloc.pnp.seed, 7u);
  EXPECT_EQ(cfg.localizer.track.pnp.seed, 7u);
  EXPECT_FALSE(cfg.mapping.local_gaba);
}

TEST(RunConfig, OverrideChangesTheHash) {
  RunConfig cfg;
  const auto before = config_hash(cfg);
  apply_override(cfg, "localizer.match_radius=12");
  EXPECT_DOUBLE_EQ(cfg.localizer.match_radius, 12.0);
  EXPECT_NE(config_hash(cfg), before);
  EXPECT_EQ(code_of([&] { apply_override(cfg, "localizer.match_radius"); }), ErrorCode::kConfig);
}

TEST(RunConfig, DefaultVoxelGridIsTheWorldGrid) {
  const RunConfig cfg;
  EXPECT_EQ(cfg.voxels, cfg.synth.voxels);
}

TEST(SynthWorld, RegenerationIsDeterministic) {
  const SynthWorld a = synth_generate(small_world());
  const SynthWorld b = synth_generate(small_world());
  ASSERT_EQ(a.landmarks.size(), b.landmarks.size());
  for (std::size_t i = 0; i < a.landmarks.size(); ++i) {
    EXPECT_EQ(a.landmarks[i].position, b.landmarks[i].position);
    EXPECT_EQ(a.landmarks[i].descriptor, b.landmarks[i].descriptor);
  }
  EXPECT_EQ(format_tum(a.gt), format_tum(b.gt));
  EXPECT_EQ(format_tum(a.priors), format_tum(b.priors));
  const auto sa = a.scans();
  const auto sb = b.scans();
  ASSERT_EQ(sa.size(), sb.size());
  for (std::size_t i = 0; i < sa.size(); ++i) EXPECT_EQ(sa[i].points, sb[i].points);
}

TEST(SynthWorld, ZeroNoiseFeaturesAreExactProjections) {
  SynthConfig cfg = small_world();
  cfg.pixel_sigma = 0.0;
  cfg.descriptor_sigma = 0.0;
  const SynthWorld w = synth_generate(cfg);
  const SyntheticOracle oracle = w.oracle();
  for (std::size_t i = 0; i < w.gt.size(); i += 7) {
    const Extraction ex = oracle.extract(FrameRef{static_cast<std::int64_t>(i)});
    ASSERT_GT(ex.local.size(), 0u);
    for (std::size_t k = 0; k < ex.local.size(); ++k) {
      const Landmark& lm = w.landmarks[ex.local.landmark_ids[k]];
      const Vec2 px = project(cfg.camera, w.gt[i].pose, lm.position);
      EXPECT_EQ(ex.local.keypoints[k], px);
      const Eigen::VectorXd d = ex.local.descriptors.row(static_cast<Eigen::Index>(k));
      EXPECT_LT((d - lm.descriptor).norm(), 1e-12);
    }
  }
}

TEST(SynthWorld, ReferenceCloudVoxelizesToTheVisibleSurfaces) {
  const SynthWorld w = synth_generate(small_world());
  const VoxelMap surface = w.surface_voxels();
  const VoxelMap reference = voxelize_cloud(w.reference_cloud(), w.cfg.voxels);
  for (const VoxelKey& k : reference.occupied_keys()) EXPECT_TRUE(surface.occupied(k));
  // Surface voxels the cloud lacks lie strictly inside a pillar.
  for (const VoxelKey& k : surface.occupied_keys()) {
    if (reference.occupied(k)) continue;
    const Vec3 c = surface.center_of(k);
    bool inside = false;
    for (const Aabb& b : w.cfg.scene.pillars) {
      inside = inside || (c.x() > b.min.x() && c.x() < b.max.x() && c.y() > b.min.y() &&
                          c.y() < b.max.y());
    }
    EXPECT_TRUE(inside) << c.transpose();
  }
}

TEST(SynthWorld, LandmarksLieOnOccupiedVoxels) {
  const SynthWorld w = synth_generate(small_world());
  const VoxelMap surface = w.surface_voxels();
  for (const Landmark& lm : w.landmarks) {
    EXPECT_TRUE(surface.occupied(surface.key_of(lm.position))) << lm.position.transpose();
  }
}

TEST(Dataset, SynthRoundTrip) {
  const fs::path dir = scratch_dir("dataset");
  const SynthWorld w = synth_generate(small_world());
  const auto files = write_synth_dataset(w, dir.string());
  EXPECT_TRUE(std::is_sorted(files.begin(), files.end()));
  for (const std::string& f : files) EXPECT_TRUE(fs::exists(dir / f)) << f;

  const Dataset ds = open_dataset(dir.string());
  EXPECT_EQ(ds.camera, w.cfg.camera);
  EXPECT_LT((ds.extrinsics.T_cl.translation() - w.cfg.extrinsics.T_cl.translation()).norm(),
            1e-15);
  ASSERT_TRUE(ds.initial_lidar_pose.has_value());
  const Sequence& mapping = ds.sequence("mapping");
  const Sequence& query = ds.sequence("query");
  ASSERT_EQ(mapping.frames.size(), w.gt.size());
  EXPECT_EQ(mapping.frames[3].timestamp, w.gt[3].timestamp);
  EXPECT_EQ(code_of([&] { ds.sequence("missing"); }), ErrorCode::kConfig);

  const auto scans = ds.load_scans();
  const auto truth = w.scans();
  ASSERT_EQ(scans.size(), truth.size());
  EXPECT_EQ(scans[1].timestamp, truth[1].timestamp);
  ASSERT_EQ(scans[1].points.size(), truth[1].points.size());
  EXPECT_LT((scans[1].points[5] - truth[1].points[5]).norm(), 1e-5);  // float32 storage

  // Mapping features are the oracle's; query features carry independent noise.
  const SyntheticOracle oracle = w.oracle();
  const ExternalProvider mp(mapping.features_dir);
  const ExternalProvider qp(query.features_dir);
  const Extraction direct = oracle.extract(FrameRef{5});
  const Extraction stored = mp.extract(FrameRef{5});
  const Extraction queried = qp.extract(FrameRef{5});
  ASSERT_EQ(stored.local.size(), direct.local.size());
  EXPECT_LT((stored.local.keypoints[0] - direct.local.keypoints[0]).norm(), 1e-4);
  ASSERT_EQ(queried.local.size(), direct.local.size());
  EXPECT_GT((queried.local.keypoints[0] - direct.local.keypoints[0]).norm(), 1e-6);
}

TEST(Dataset, MalformedFilesAreCorrupt) {
  const fs::path dir = scratch_dir("malformed");
  EXPECT_EQ(code_of([&] { open_dataset(dir.string()); }), ErrorCode::kIo);
  std::ofstream(dir / "dataset.json") << "{\"format\": 1, \"camera\": {\"fx\": 1}}";
  EXPECT_EQ(code_of([&] { open_dataset(dir.string()); }), ErrorCode::kCorrupt);
  std::ofstream(dir / "dataset.json") << "{not json";
  EXPECT_EQ(code_of([&] { open_dataset(dir.string()); }), ErrorCode::kCorrupt);
  std::ofstream(dir / "dataset.json")
      << "{\"format\": 1, \"camera\": {\"fx\": 400, \"fy\": 400, \"cx\": 320, \"cy\": 240, "
         "\"width\": 640, \"height\": 480}, \"sequences\": {\"s\": {\"frames\": \"f.txt\"}}}";
  std::ofstream(dir / "f.txt") << "0 1.0\n1 0.5\n";
  EXPECT_EQ(code_of([&] { open_dataset(dir.string()); }), ErrorCode::kCorrupt);
  std::ofstream(dir / "dataset.json")
      << "{\"format\": 2, \"camera\": {}, \"sequences\": {}}";
  EXPECT_EQ(code_of([&] { open_dataset(dir.string()); }), ErrorCode::kVersionMismatch);
}

TEST(Pipeline, VocabularyRoundTrip) {
  const fs::path dir = scratch_dir("vocab");
  Vocabulary v;
  v.words = DescriptorMatrix::Random(5, 8).rowwise().normalized();
  v.idf = Eigen::VectorXd::Random(5);
  save_vocabulary((dir / "v.vocab").string(), v);
  EXPECT_EQ(load_vocabulary((dir / "v.vocab").string()), v);
  auto bytes = read_file_bytes((dir / "v.vocab").string());
  bytes[0] ^= 0xff;
  write_file_bytes((dir / "bad.vocab").string(), bytes);
  EXPECT_EQ(code_of([&] { load_vocabulary((dir / "bad.vocab").string()); }),
            ErrorCode::kCorrupt);
}

TEST(Pipeline, ProviderNeedsItsInputs) {
  RunConfig cfg;
  Sequence seq;
  seq.name = "s";
  EXPECT_EQ(code_of([&] { make_provider(cfg, seq, {}); }), ErrorCode::kConfig);
  cfg.feature_provider = "classical";
  EXPECT_EQ(code_of([&] { make_provider(cfg, seq, {}); }), ErrorCode::kConfig);
  EXPECT_EQ(parse_prior_source("dataset"), PriorSource::kDataset);
  EXPECT_EQ(code_of([] { parse_prior_source("gps"); }), ErrorCode::kConfig);
}

TEST(Pipeline, EvaluateOutputMatchesTheLibrary) {
  const SynthWorld w = synth_generate(small_world());
  const TrajectoryMetrics same = ape_rpe(w.gt, w.gt);
  const std::string table = format_metrics_table(same);
  EXPECT_NE(table.find("ape_trans_mean_m       0.000000000"), std::string::npos);
  EXPECT_NE(table.find("pairs                  40"), std::string::npos);
  const TrajectoryMetrics m = ape_rpe(w.priors, w.gt);
  const std::string csv = format_metrics_csv(m);
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), m.pairs + 1);
  char row[128];
  std::snprintf(row, sizeof row, "%.9f,%.9f,%.9f\n", m.timestamps[2], m.ape_trans[2],
                m.ape_rot[2]);
  EXPECT_NE(csv.find(row), std::string::npos);
}

TEST(Pipeline, FrameLogIsOneKeyValueRecord) {
  FrameLog f;
  f.index = 12;
  f.timestamp = 1.2;
  f.ok = true;
  f.mode = TrackMode::kTracking;
  f.inliers = 40;
  f.tracked = 44;
  f.timing.total = 2.5;
  const std::string line = format_frame_log(f);
  EXPECT_EQ(line.find('\n'), std::string::npos);
  EXPECT_EQ(line.rfind("frame=12 t=1.200000 ok=1 mode=tracking inliers=40 tracked=44 lost=0 "
                       "error=none",
                       0),
            0u);
  EXPECT_NE(line.find("total_ms=2.500"), std::string::npos);
  f.ok = false;
  f.error = ErrorCode::kRetrievalEmpty;
  EXPECT_NE(format_frame_log(f).find("error=" + std::string(error_name(ErrorCode::kRetrievalEmpty))),
            std::string::npos);
}

TEST(Manifest, HashesInputsAndOutputs) {
  const fs::path dir = scratch_dir("manifest");
  std::ofstream(dir / "a.txt") << "alpha";
  fs::create_directories(dir / "d/sub");
  std::ofstream(dir / "d/sub/x.bin") << "x";
  std::ofstream(dir / "d/y.bin") << "y";
  const auto h1 = path_hash((dir / "d").string());
  EXPECT_EQ(path_hash((dir / "d").string()), h1);
  std::ofstream(dir / "d/y.bin") << "z";
  EXPECT_NE(path_hash((dir / "d").string()), h1);
  EXPECT_EQ(code_of([&] { path_hash((dir / "nope").string()); }), ErrorCode::kIo);

  Manifest m{"test", {"--flag"}, RunConfig{}, {{"a", (dir / "a.txt").string()}}, {}};
  const std::string json = m.to_json();
  EXPECT_NE(json.find(hex64(config_hash(RunConfig{}))), std::string::npos);
  EXPECT_NE(json.find(hex64(path_hash((dir / "a.txt").string()))), std::string::npos);
  EXPECT_NE(json.find(kPriorlocVersion), std::string::npos);
  EXPECT_EQ(hex64(0xabcULL), "0x0000000000000abc");
}

}  // namespace
}  // namespace priorloc
