#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <chrono>
#include <filesystem>
#include <random>

#include "priorloc/common/binary_io.hpp"
#include "priorloc/common/error.hpp"
#include "priorloc/geometry/alignment.hpp"
#include "priorloc/mapper/map_io.hpp"
#include "support/finite_diff.hpp"
#include "support/mapping.hpp"
#include "support/scenes.hpp"

namespace priorloc {
namespace {

using testing::numeric_jacobian;
using testing::relative_error;

SynthConfig quiet_config() {
  SynthConfig c;
  c.pixel_sigma = 0.0;
  c.descriptor_sigma = 0.0;
  c.prior_sigma_t = 0.0;
  c.prior_sigma_r = 0.0;
  return c;
}

std::vector<std::size_t> every(std::size_t step, std::size_t begin, std::size_t end) {
  std::vector<std::size_t> out;
  for (std::size_t i = begin; i < end; i += step) out.push_back(i);
  return out;
}

// ---------------------------------------------------------------- factors

TEST(Factors, VisualJacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n01;
  const Intrinsics K;
  int checked = 0;
  while (checked < 200) {
    const Pose T = testing::random_pose(rng, kPi, 3.0);
    const Vec3 pc(n01(rng), n01(rng), 2.0 + std::abs(3.0 * n01(rng)));
    const Vec3 p = T * pc;
    const Vec2 x(320 + 50 * n01(rng), 240 + 50 * n01(rng));
    Vec2 r;
    Mat26 Jp;
    Mat23 Jx;
    ASSERT_TRUE(visual_residual(K, T, p, x, &r, &Jp, &Jx));
    const auto f_pose = [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
      Vec2 out;
      visual_residual(K, apply_pose_update(T, d), p, x, &out);
      return out;
    };
    const auto f_point = [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
      Vec2 out;
      visual_residual(K, T, p + Vec3(d), x, &out);
      return out;
    };
    EXPECT_LT(relative_error(Jp, numeric_jacobian(f_pose, Eigen::VectorXd::Zero(6))), 1e-5);
    EXPECT_LT(relative_error(Jx, numeric_jacobian(f_point, Eigen::VectorXd::Zero(3))), 1e-5);
    ++checked;
  }
}

TEST(Factors, StructureJacobianIsIdentity) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n01;
  for (int i = 0; i < 200; ++i) {
    const Vec3 p(n01(rng), n01(rng), n01(rng)), hit(n01(rng), n01(rng), n01(rng));
    const auto f = [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
      return structure_residual(p + Vec3(d), hit);
    };
    EXPECT_LT(relative_error(Mat3::Identity(), numeric_jacobian(f, Eigen::VectorXd::Zero(3))),
              1e-5);
  }
}

TEST(Factors, PriorJacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 200; ++i) {
    const Pose prior = testing::random_pose(rng, kPi, 5.0);
    const Pose T = prior * testing::random_pose(rng, 0.5, 0.5);
    Mat6 J;
    prior_residual(T, prior, &J);
    const auto f = [&](const Eigen::VectorXd& d) -> Eigen::VectorXd {
      return prior_residual(apply_pose_update(T, d), prior);
    };
    EXPECT_LT(relative_error(J, numeric_jacobian(f, Eigen::VectorXd::Zero(6))), 1e-5);
  }
}

TEST(Factors, PriorResidualVanishesAtPrior) {
  std::mt19937_64 rng(14);
  const Pose T = testing::random_pose(rng, kPi, 5.0);
  EXPECT_LT(prior_residual(T, T).norm(), 1e-15);
}

TEST(Factors, BehindCameraIsRejected) {
  Vec2 r(7, 7);
  EXPECT_FALSE(visual_residual(Intrinsics{}, Pose(), Vec3(0, 0, -1), Vec2(320, 240), &r));
  EXPECT_EQ(r, Vec2(7, 7));
}

TEST(Huber, InfluenceIsCappedAtThreshold) {
  const Huber h{1.5};
  for (double r = 0.1; r < 50.0; r *= 1.3) {
    // d/dr of 0.5 rho(r^2)
    const double eps = 1e-6 * std::max(1.0, r);
    const double g =
        (0.5 * h.rho((r + eps) * (r + eps)) - 0.5 * h.rho((r - eps) * (r - eps))) / (2 * eps);
    EXPECT_NEAR(g, h.weight(r * r) * r, 1e-6);
    if (r > h.delta) {
      EXPECT_NEAR(g, h.delta, 1e-6);
    } else {
      EXPECT_NEAR(g, r, 1e-6);
    }
    EXPECT_LE(g, h.delta + 1e-6);
  }
  EXPECT_DOUBLE_EQ(h.rho(4.0), 2 * 1.5 * 2.0 - 1.5 * 1.5);
}

// ---------------------------------------------------------------- LM

BundleProblem random_problem(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  BundleProblem pb;
  for (int c = 0; c < 5; ++c) {
    pb.add_pose(Pose(Quat::Identity(), Vec3(0.5 * c, 0, 0)), c == 0);
  }
  std::vector<Vec3> truth;
  for (int j = 0; j < 60; ++j) truth.push_back(Vec3(2 * n01(rng), n01(rng), 6 + n01(rng)));
  for (int j = 0; j < 60; ++j) {
    pb.add_point(truth[j] + 0.2 * Vec3(n01(rng), n01(rng), n01(rng)));
    for (int c = 0; c < 5; ++c) {
      const Vec2 x = project(pb.K, pb.poses[c], truth[j]) + Vec2(n01(rng), n01(rng));
      pb.visual.push_back({static_cast<std::size_t>(c), static_cast<std::size_t>(j), x, 1.0,
                           Huber{2.0}});
    }
    pb.structure.push_back({static_cast<std::size_t>(j), truth[j], 0.1, Huber{5.0}});
  }
  for (int c = 1; c < 5; ++c) {
    const Pose prior = pb.poses[c];
    pb.poses[c] = apply_pose_update(pb.poses[c], 0.05 * Vec6(n01(rng), n01(rng), n01(rng),
                                                             n01(rng), n01(rng), n01(rng)));
    pb.priors.push_back({static_cast<std::size_t>(c), prior, 0.05, 0.01, Huber{1.0}});
  }
  return pb;
}

TEST(BundleSolver, CostNeverIncreases) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    BundleProblem pb = random_problem(seed);
    const double before = robust_cost(pb);
    const LmReport rep = solve_bundle(pb, LmConfig{.max_iterations = 30});
    ASSERT_FALSE(rep.cost_history.empty());
    EXPECT_DOUBLE_EQ(rep.cost_history.front(), before);
    for (std::size_t i = 1; i < rep.cost_history.size(); ++i) {
      EXPECT_LE(rep.cost_history[i], rep.cost_history[i - 1] + 1e-12);
    }
    EXPECT_LT(rep.final_cost, before);
    EXPECT_NEAR(rep.final_cost, robust_cost(pb), 1e-9 * std::max(1.0, rep.final_cost));
  }
}

TEST(BundleSolver, FixedVariablesDoNotMove) {
  BundleProblem pb = random_problem(3);
  pb.point_fixed[5] = true;
  const Pose T0 = pb.poses[0];
  const Vec3 p5 = pb.points[5];
  solve_bundle(pb);
  EXPECT_EQ(pb.poses[0].translation(), T0.translation());
  EXPECT_EQ(pb.poses[0].rotation().coeffs(), T0.rotation().coeffs());
  EXPECT_EQ(pb.points[5], p5);
}

// ---------------------------------------------------------------- keyframes

TEST(Keyframes, StraightPath) {
  Trajectory t;
  for (int i = 0; i < 100; ++i) t.push_back(i * 0.1, Pose(Quat::Identity(), Vec3(i * 10.0 / 99, 0, 0)));
  const auto sel = sample_keyframes(t, {.d_trans = 1.0});
  EXPECT_EQ(sel.indices.size(), 11u);
  for (std::size_t k = 1; k + 1 < sel.indices.size(); ++k) {
    const double gap = t[sel.indices[k]].pose.translation().x() -
                       t[sel.indices[k - 1]].pose.translation().x();
    EXPECT_GT(gap, 1.0);
    EXPECT_LT(gap, 1.11);
  }
}

TEST(Keyframes, Stationary) {
  Trajectory t;
  for (int i = 0; i < 50; ++i) t.push_back(i * 0.1, Pose());
  const auto sel = sample_keyframes(t);
  EXPECT_EQ(sel.indices, std::vector<std::size_t>{0});
  EXPECT_TRUE(sel.co_observing.empty());
}

TEST(Keyframes, RotationSweep) {
  Trajectory t;
  for (int i = 0; i <= 90; ++i) {
    t.push_back(i, Pose::FromAxisAngle(Vec3::UnitZ(), i * kDegToRad, Vec3::Zero()));
  }
  const auto sel = sample_keyframes(t, {.d_trans = 1.0, .d_rot = 15.0 * kDegToRad});
  EXPECT_EQ(sel.indices.size(), 7u);
}

TEST(Keyframes, CoObservingPairsRespectGates) {
  Trajectory t;
  for (int i = 0; i < 200; ++i) t.push_back(i, Pose(Quat::Identity(), Vec3(0.1 * i, 0, 0)));
  const KeyframeSamplingConfig cfg;
  const auto sel = sample_keyframes(t, cfg);
  ASSERT_FALSE(sel.co_observing.empty());
  for (const auto& [a, b] : sel.co_observing) {
    EXPECT_LT(a, b);
    const double d = (t[sel.indices[a]].pose.translation() - t[sel.indices[b]].pose.translation()).norm();
    EXPECT_LE(d, cfg.co_trans);
  }
  // Every adjacent pair of keyframes is a candidate.
  for (std::size_t k = 1; k < sel.indices.size(); ++k) {
    EXPECT_NE(std::find(sel.co_observing.begin(), sel.co_observing.end(),
                        std::make_pair(k - 1, k)),
              sel.co_observing.end());
  }
}

// ---------------------------------------------------------------- triangulation

TEST(Triangulation, TwoViewsNoiseFree) {
  const Intrinsics K;
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n01;
  for (int i = 0; i < 50; ++i) {
    const Pose A(Quat::Identity(), Vec3::Zero());
    const Pose B(quat_exp(Vec3(0, -0.05, 0)), Vec3(1, 0, 0));
    const Vec3 p(0.5 + n01(rng), n01(rng), 5 + std::abs(n01(rng)));
    const std::vector<TriangulationObservation> obs{{A, K, project(K, A, p)},
                                                    {B, K, project(K, B, p)}};
    EXPECT_LT((triangulate(obs) - p).norm(), 1e-6);
  }
}

TEST(Triangulation, IdenticalPosesLackParallax) {
  const Intrinsics K;
  const Pose A;
  const Vec3 p(0.1, 0.2, 4.0);
  const std::vector<TriangulationObservation> obs{{A, K, project(K, A, p)}, {A, K, project(K, A, p)}};
  try {
    triangulate(obs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientParallax);
  }
  EXPECT_THROW(triangulate(std::span(obs).first(1)), Error);
}

TEST(Triangulation, RaysMeetingBehindCameras) {
  const Intrinsics K;
  const Pose A(Quat::Identity(), Vec3(0, 0, 0));
  const Pose B(Quat::Identity(), Vec3(1, 0, 0));
  // Forward rays diverge, so the lines meet at z = -5.
  const Vec2 xa(K.cx - 0.1 * K.fx, K.cy), xb(K.cx + 0.1 * K.fx, K.cy);
  const std::vector<TriangulationObservation> obs{{A, K, xa}, {B, K, xb}};
  try {
    triangulate(obs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCheiralityViolation);
  }
}

TEST(Triangulation, InconsistentPixelsRejected) {
  const Intrinsics K;
  const Pose A, B(Quat::Identity(), Vec3(1, 0, 0));
  const Vec3 p(0.5, 0, 5);
  const std::vector<TriangulationObservation> obs{{A, K, project(K, A, p)},
                                                  {B, K, project(K, B, p) + Vec2(0, 30)}};
  try {
    triangulate(obs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kLargeReprojection);
  }
}

// ---------------------------------------------------------------- world fixtures

class MapperWorld : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    world_ = new SynthWorld(synth_generate(quiet_config()));
    oracle_ = new SyntheticOracle(world_->oracle());
    voxels_ = new VoxelMap(world_->surface_voxels());
  }
  static void TearDownTestSuite() {
    delete world_;
    delete oracle_;
    delete voxels_;
  }
  static SynthWorld* world_;
  static SyntheticOracle* oracle_;
  static VoxelMap* voxels_;
};
SynthWorld* MapperWorld::world_ = nullptr;
SyntheticOracle* MapperWorld::oracle_ = nullptr;
VoxelMap* MapperWorld::voxels_ = nullptr;

TEST_F(MapperWorld, GroundTruthIsAFixedPoint) {
  auto gt = testing::ground_truth_map(*world_, *oracle_, every(5, 0, 300), voxels_);
  ASSERT_GT(gt.map.point_count(), 80u);
  const VisualMap before = gt.map;
  GabaConfig cfg;
  cfg.cull_outliers = false;
  const GabaReport rep = gaba(gt.map, voxels_, cfg);
  ASSERT_EQ(rep.rounds.size(), 5u);
  EXPECT_EQ(rep.rounds.front().associations, gt.map.point_count());
  for (const auto& r : rep.rounds) EXPECT_LT(r.cost_start, 1e-12);
  for (const auto& kf : gt.map.keyframes()) {
    const auto& b = before.keyframe(kf.id);
    EXPECT_LT((kf.pose.translation() - b.pose.translation()).norm(), 1e-9);
    EXPECT_LT(rotation_angle(kf.pose.rotation(), b.pose.rotation()), 1e-9);
  }
  const BundleProblem pb = make_bundle_problem(gt.map, cfg);
  for (const auto& v : pb.visual) {
    Vec2 r;
    ASSERT_TRUE(visual_residual(pb.K, pb.poses[v.camera], pb.points[v.point], v.measurement, &r));
    EXPECT_LT(r.norm(), 1e-9);
  }
  for (const auto& [id, mp] : gt.map.points()) {
    EXPECT_LT((mp.position - world_->landmarks[gt.landmark_of[id]].position).norm(), 1e-9);
  }
}

TEST_F(MapperWorld, ScaleIsRecovered) {
  auto gt = testing::ground_truth_map(*world_, *oracle_, every(5, 0, 300), voxels_);
  VisualMap& map = gt.map;
  for (const auto& kf : map.keyframes()) {
    Keyframe& k = map.keyframe(kf.id);
    k.pose = Pose(k.pose.rotation(), 1.5 * k.pose.translation());
  }
  for (const auto& [id, mp] : map.points()) map.point(id).position *= 1.5;
  GabaConfig cfg;
  cfg.cull_outliers = false;
  gaba(map, voxels_, cfg);
  std::vector<double> ratio;
  for (const auto& [id, mp] : map.points()) {
    ratio.push_back(mp.position.norm() / world_->landmarks[gt.landmark_of[id]].position.norm());
  }
  EXPECT_NEAR(testing::median(ratio), 1.0, 0.01);
}

TEST_F(MapperWorld, VisualOnlyHessianHasSevenDimensionalNullspace) {
  auto gt = testing::ground_truth_map(*world_, *oracle_, every(3, 0, 30), nullptr, 3, 12.0);
  ASSERT_GT(gt.map.point_count(), 50u);
  GabaConfig cfg;
  cfg.use_structure = false;
  cfg.use_prior = false;
  const Eigen::MatrixXd H = dense_hessian(make_bundle_problem(gt.map, cfg));
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  const double top = ev.maxCoeff();
  int small = 0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) small += std::abs(ev[i]) < 1e-8 * top ? 1 : 0;
  EXPECT_EQ(small, 7);
}

TEST_F(MapperWorld, PriorOnlyDisabledStillConverges) {
  auto gt = testing::ground_truth_map(*world_, *oracle_, every(5, 0, 60), voxels_);
  GabaConfig cfg;
  cfg.use_prior = false;
  EXPECT_NO_THROW(gaba(gt.map, voxels_, cfg));
  cfg.use_structure = true;
  EXPECT_THROW(gaba(gt.map, nullptr, cfg), Error);
}

TEST_F(MapperWorld, ReconstructionRecoversVisibleLandmarks) {
  const auto frames = testing::mapping_frames(*world_, *oracle_, 140, false);
  ReconstructionReport rep;
  const VisualMap map = reconstruct(frames, world_->cfg.camera, voxels_, {}, &rep);
  map.validate();
  EXPECT_GE(map.keyframe_count(), 30u);
  // Landmarks seen in at least three keyframes.
  std::map<std::int64_t, int> seen;
  for (const auto& kf : map.keyframes()) {
    for (auto id : kf.features.landmark_ids) ++seen[id];
  }
  std::size_t visible = 0, good = 0;
  std::map<std::int64_t, Vec3> recon;
  for (const auto& [id, mp] : map.points()) {
    const auto& o = mp.observers.front();
    recon[map.keyframe(o.keyframe).features.landmark_ids[o.keypoint]] = mp.position;
  }
  for (const auto& [lm, n] : seen) {
    if (n < 3) continue;
    ++visible;
    const auto it = recon.find(lm);
    if (it != recon.end() && (it->second - world_->landmarks[lm].position).norm() < 0.05) ++good;
  }
  EXPECT_GE(static_cast<double>(good), 0.95 * static_cast<double>(visible))
      << good << " of " << visible;
}

TEST(Reconstruction, SingleKeyframeFails) {
  SynthConfig c = quiet_config();
  c.frames = 20;
  c.loop_radius_x = 0.01;
  c.loop_radius_y = 0.01;
  const SynthWorld w = synth_generate(c);
  const auto oracle = w.oracle();
  const auto frames = testing::mapping_frames(w, oracle, 1, false);
  try {
    reconstruct(frames, c.camera, nullptr, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kReconstructionFailed);
  }
}

TEST(Reconstruction, ImprovesOnNoisyPriors) {
  SynthConfig c;
  const SynthWorld w = synth_generate(c);
  const auto oracle = w.oracle();
  const VoxelMap voxels = w.surface_voxels();
  const auto frames = testing::mapping_frames(w, oracle, 120, true);
  const VisualMap map = reconstruct(frames, c.camera, &voxels, {});
  Trajectory est, prior, ref;
  for (const auto& kf : map.keyframes()) {
    est.push_back(kf.timestamp, kf.pose);
    prior.push_back(kf.timestamp, kf.prior_pose);
    ref.push_back(kf.timestamp, w.gt[kf.frame_index].pose);
  }
  const auto m_est = ape_rpe(est, ref), m_prior = ape_rpe(prior, ref);
  EXPECT_LT(m_est.ape_trans_mean, m_prior.ape_trans_mean);
  EXPECT_LT(m_est.ape_rot_mean, m_prior.ape_rot_mean);
}

TEST(Reconstruction, StructureFactorPullsPointsOntoSurfaces) {
  SynthConfig c;
  const SynthWorld w = synth_generate(c);
  const auto oracle = w.oracle();
  const VoxelMap voxels = w.surface_voxels();
  const auto frames = testing::mapping_frames(w, oracle, 120, true);
  ReconstructionConfig on;
  ReconstructionConfig off;
  off.gaba.use_structure = false;
  const VisualMap with = reconstruct(frames, c.camera, &voxels, on);
  const VisualMap without = reconstruct(frames, c.camera, &voxels, off);
  EXPECT_LT(testing::median_structure_distance(with, voxels),
            testing::median_structure_distance(without, voxels));
}

// ---------------------------------------------------------------- map IO

TEST_F(MapperWorld, SaveLoadRoundTrip) {
  auto gt = testing::ground_truth_map(*world_, *oracle_, every(10, 0, 100), voxels_);
  const auto dir = std::filesystem::temp_directory_path() / "priorloc_map_io";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "map.plm").string();
  save_map(path, gt.map, *voxels_);
  const PriorMap loaded = load_map(path);
  EXPECT_TRUE(loaded.visual == gt.map);
  EXPECT_TRUE(loaded.voxels == *voxels_);
  EXPECT_EQ(map_hash(loaded.visual, loaded.voxels), map_hash(gt.map, *voxels_));

  auto bytes = serialize_map(gt.map, *voxels_);
  const auto expect_code = [](std::span<const std::uint8_t> b, ErrorCode code) {
    try {
      deserialize_map(b);
      ADD_FAILURE() << "no error";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), code) << e.what();
    }
  };
  expect_code(std::span(bytes).first(bytes.size() / 2), ErrorCode::kCorrupt);
  expect_code(std::span(bytes).first(bytes.size() - 1), ErrorCode::kCorrupt);
  auto flipped = bytes;
  flipped[flipped.size() / 3] ^= 0x10;
  expect_code(flipped, ErrorCode::kCorrupt);
  auto future = bytes;
  future[4] = static_cast<std::uint8_t>(kMapFormatVersion + 1);
  expect_code(future, ErrorCode::kVersionMismatch);
  auto magic = bytes;
  magic[0] = 'X';
  expect_code(magic, ErrorCode::kCorrupt);
}

}  // namespace
}  // namespace priorloc
