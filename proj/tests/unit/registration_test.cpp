#include <Eigen/Eigenvalues>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <gtest/gtest.h>
#include <random>

#include "priorloc/common/error.hpp"
#include "priorloc/registration/cloud_io.hpp"
#include "priorloc/registration/gicp.hpp"
#include "priorloc/registration/prior_generation.hpp"
#include "support/finite_diff.hpp"
#include "support/scenes.hpp"

namespace priorloc {
namespace {

using testing::corner_scene;
using testing::perturb;
using testing::random_pose;

double rot_deg(const Pose& a, const Pose& b) {
  return rotation_angle(a.rotation(), b.rotation()) * kRadToDeg;
}

TEST(Covariance, PlaneNormalIsSmallestEigenvector) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec3> pts;
  for (int i = 0; i < 100; ++i) pts.emplace_back(u(rng), u(rng), 0.0);
  const CovCloud cloud = compute_covariances(pts, 20);
  for (const Mat3& c : cloud.covariances()) {
    Eigen::SelfAdjointEigenSolver<Mat3> es(c);
    EXPECT_NEAR(es.eigenvalues()(0), 1e-3, 1e-12);
    EXPECT_NEAR(es.eigenvalues()(1), 1.0, 1e-12);
    const double cosang = std::abs(es.eigenvectors().col(0).dot(Vec3::UnitZ()));
    EXPECT_LT(std::acos(std::min(1.0, cosang)) * kRadToDeg, 2.0);
  }
}

TEST(Covariance, CoincidentPointsStayFinite) {
  std::vector<Vec3> pts(10, Vec3(1.0, 2.0, 3.0));
  const CovCloud cloud = compute_covariances(pts, 4, 1e-3);
  for (const Mat3& c : cloud.covariances()) {
    EXPECT_TRUE(c.allFinite());
    EXPECT_TRUE(c.isApprox(1e-3 * Mat3::Identity()));
  }
}

TEST(Covariance, TooFewPoints) {
  std::vector<Vec3> pts(3, Vec3::Zero());
  try {
    compute_covariances(pts, 4);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTooFewPoints);
  }
}

TEST(Covariance, RotatesWithoutTranslation) {
  const auto pts = corner_scene(300, 5);
  const CovCloud cloud = compute_covariances(pts, 10);
  std::mt19937_64 rng(6);
  const Pose G = random_pose(rng, kPi, 5.0);
  const CovCloud moved = cloud.transformed(G);
  const Mat3 R = G.rotation_matrix();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Mat3 expected = R * cloud.covariances()[i] * R.transpose();
    EXPECT_LT((moved.covariances()[i] - expected).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT((moved.points()[i] - G * cloud.points()[i]).norm(), 1e-12);
  }
}

TEST(CovCloud, RejectsBadInput) {
  EXPECT_THROW(CovCloud({Vec3::Zero()}, {}), Error);
  Mat3 asym = Mat3::Identity();
  asym(0, 1) = 0.5;
  EXPECT_THROW(CovCloud({Vec3::Zero()}, {asym}), Error);
  EXPECT_THROW(CovCloud({Vec3::Zero()}, {-Mat3::Identity()}), Error);
}

TEST(KdTree, MatchesBruteForce) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::vector<Vec3> pts;
  for (int i = 0; i < 2000; ++i) pts.emplace_back(u(rng), u(rng), u(rng));
  const KdTree3 tree(pts);
  for (int q = 0; q < 200; ++q) {
    const Vec3 query(u(rng), u(rng), u(rng));
    std::vector<std::pair<double, std::uint32_t>> all;
    for (std::uint32_t i = 0; i < pts.size(); ++i) {
      all.emplace_back((pts[i] - query).squaredNorm(), i);
    }
    std::sort(all.begin(), all.end());
    const auto nn = tree.nearest(query);
    ASSERT_TRUE(nn);
    EXPECT_EQ(nn->index, all[0].second);
    const auto knn = tree.knn(query, 7);
    ASSERT_EQ(knn.size(), 7u);
    for (int k = 0; k < 7; ++k) EXPECT_EQ(knn[k].index, all[k].second);
    EXPECT_FALSE(tree.nearest(query, std::sqrt(all[0].first) * 0.999));
  }
}

TEST(Gicp, IdentityOnSameCloud) {
  const CovCloud cloud = compute_covariances(corner_scene(600, 1), 10);
  const GicpResult r = gicp(cloud, cloud, Pose::Identity());
  EXPECT_TRUE(r.converged);
  EXPECT_LT(r.pose.translation().norm(), 1e-9);
  EXPECT_LT(rot_deg(r.pose, Pose::Identity()), 1e-7);
  EXPECT_LT(r.final_cost, 1e-12);
}

TEST(Gicp, RecoversCornerTransform) {
  const auto pts = corner_scene(2000, 11);
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    const Pose G = random_pose(rng, 0.5, 1.0);
    std::vector<Vec3> moved;
    for (const auto& p : pts) moved.push_back(G * p);
    const auto t0 = std::chrono::steady_clock::now();
    const CovCloud src = compute_covariances(pts, 10);
    const CovCloud dst = compute_covariances(moved, 10);
    const Pose init = perturb(G, rng, 0.3, 10.0 * kDegToRad);
    const GicpResult r = gicp(src, dst, init);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    EXPECT_LT((r.pose.translation() - G.translation()).norm(), 1e-3);
    EXPECT_LT(rot_deg(r.pose, G), 0.05);
    EXPECT_LT(secs, 2.0);
  }
}

TEST(Gicp, PlaneLeavesInPlaneDirectionsWeak) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 4.0);
  std::vector<Vec3> src_pts, dst_pts;
  for (int i = 0; i < 800; ++i) {
    const Vec3 p(u(rng), u(rng), 0.0);
    src_pts.push_back(p);
    dst_pts.push_back(p + Vec3(0.3, 0.2, 0.0));
  }
  const CovCloud src = compute_covariances(src_pts, 10);
  const CovCloud dst = compute_covariances(dst_pts, 10);
  const GicpResult r = gicp(src, dst, Pose(Quat::Identity(), Vec3(0.0, 0.0, 0.05)));
  EXPECT_LT(std::abs(r.pose.translation().z()), 1e-3);

  // Translation block of the inverse Hessian: in-plane variance dwarfs the
  // normal one.
  const Mat6 cov = r.hessian.completeOrthogonalDecomposition().pseudoInverse();
  const double normal_var = cov(2, 2);
  const double inplane_var = std::min(cov(0, 0), cov(1, 1));
  EXPECT_TRUE(!r.converged || inplane_var > 100.0 * normal_var);
}

TEST(Gicp, CostNeverIncreasesWithinIteration) {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> noise(0.0, 0.01);
  const auto pts = corner_scene(1500, 32);
  for (int trial = 0; trial < 10; ++trial) {
    const Pose G = random_pose(rng, 0.3, 0.5);
    std::vector<Vec3> moved;
    for (const auto& p : corner_scene(1500, 100 + trial)) {
      moved.push_back(G * p + Vec3(noise(rng), noise(rng), noise(rng)));
    }
    const GicpResult r = gicp(compute_covariances(pts, 10), compute_covariances(moved, 10),
                              perturb(G, rng, 0.2, 0.1));
    ASSERT_FALSE(r.history.empty());
    for (const auto& it : r.history) EXPECT_LE(it.cost_after, it.cost_before);
  }
}

TEST(Gicp, Equivariance) {
  std::mt19937_64 rng(41);
  std::normal_distribution<double> noise(0.0, 0.01);
  const auto src_pts = corner_scene(1200, 42);
  std::vector<Vec3> dst_pts;
  const Pose T_true = random_pose(rng, 0.2, 0.3);
  for (const auto& p : corner_scene(1200, 43)) {
    dst_pts.push_back(T_true * p + Vec3(noise(rng), noise(rng), noise(rng)));
  }
  const CovCloud src = compute_covariances(src_pts, 10);
  const CovCloud dst = compute_covariances(dst_pts, 10);
  const Pose T0 = perturb(T_true, rng, 0.1, 0.05);
  const Pose base = gicp(src, dst, T0).pose;
  for (int trial = 0; trial < 5; ++trial) {
    const Pose G = random_pose(rng, kPi, 10.0);
    const Pose moved = gicp(src.transformed(G), dst.transformed(G), G * T0 * G.inverse()).pose;
    const Pose expected = G * base * G.inverse();
    EXPECT_LT((moved.translation() - expected.translation()).norm(), 1e-6);
    EXPECT_LT(rotation_angle(moved.rotation(), expected.rotation()), 1e-6);
  }
}

TEST(Gicp, JacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(51);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const Pose T = random_pose(rng, kPi, 5.0);
    const Vec3 s(n(rng), n(rng), n(rng));
    const Vec3 t(n(rng), n(rng), n(rng));
    const auto f = [&](const Eigen::VectorXd& xi) -> Eigen::VectorXd {
      return gicp_residual(se3_exp(Vec6(xi)) * T, s, t);
    };
    const Eigen::MatrixXd fd = testing::numeric_jacobian(f, Eigen::VectorXd::Zero(6));
    EXPECT_LT(testing::relative_error(gicp_jacobian(T, s), fd), 1e-5);
  }
}

TEST(Gicp, NoCorrespondencesBeyondGate) {
  const CovCloud a = compute_covariances(corner_scene(100, 1), 10);
  try {
    gicp(a, a, Pose(Quat::Identity(), Vec3(50.0, 0.0, 0.0)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoCorrespondences);
  }
}

TEST(CameraPrior, MidpointOfPureTranslation) {
  Trajectory lidar;
  lidar.push_back(0.0, Pose::Identity());
  lidar.push_back(1.0, Pose(Quat::Identity(), Vec3(1.0, 0.0, 0.0)));
  const Pose p = camera_prior_at(lidar, 0.5, Extrinsics{});
  EXPECT_DOUBLE_EQ(p.translation().x(), 0.5);
  EXPECT_DOUBLE_EQ(p.translation().y(), 0.0);
  EXPECT_THROW(camera_prior_at(lidar, 1.5, Extrinsics{}), Error);
}

TEST(CameraPrior, ExtrinsicsComposeOnTheRight) {
  std::mt19937_64 rng(61);
  Trajectory lidar;
  lidar.push_back(0.0, random_pose(rng, 1.0, 2.0));
  lidar.push_back(1.0, random_pose(rng, 1.0, 2.0));
  const Extrinsics ext{random_pose(rng, 1.0, 0.5)};
  const Pose cam = camera_prior_at(lidar, 1.0, ext);
  // A point in the camera frame maps to the same world point as its LiDAR
  // frame counterpart.
  const Vec3 p_l(0.3, -1.0, 2.0);
  const Vec3 p_c = ext.T_cl * p_l;
  EXPECT_LT((cam * p_c - lidar[1].pose * p_l).norm(), 1e-12);
}

// A room with interior boxes, sampled densely enough for scan-to-map GICP.
std::vector<Vec3> room_world(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec3> pts;
  const auto box = [&](const Vec3& lo, const Vec3& hi, double density) {
    const Vec3 e = hi - lo;
    const double areas[3] = {e.y() * e.z(), e.x() * e.z(), e.x() * e.y()};
    for (int axis = 0; axis < 3; ++axis) {
      const int n = static_cast<int>(areas[axis] * density);
      for (int side = 0; side < 2; ++side) {
        for (int i = 0; i < n; ++i) {
          Vec3 p(lo.x() + u(rng) * e.x(), lo.y() + u(rng) * e.y(), lo.z() + u(rng) * e.z());
          p[axis] = side ? hi[axis] : lo[axis];
          pts.push_back(p);
        }
      }
    }
  };
  box(Vec3(-10, -4, 0), Vec3(10, 4, 4), 40.0);
  box(Vec3(-6, 1.5, 0), Vec3(-5, 2.5, 2), 60.0);
  box(Vec3(2, -3, 0), Vec3(3.5, -2, 3), 60.0);
  box(Vec3(6, 1, 0), Vec3(7, 3, 1.5), 60.0);
  box(Vec3(-2, -1, 0), Vec3(-1.5, -0.5, 4), 60.0);
  return pts;
}

TEST(PriorGeneration, TracksSyntheticScans) {
  std::mt19937_64 rng(71);
  const auto world = room_world(rng);
  const CovCloud ref = compute_covariances(voxel_downsample(world, 0.1), 20);

  std::normal_distribution<double> noise(0.0, 0.005);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<LidarScan> scans;
  Trajectory truth;
  for (int k = 0; k < 20; ++k) {
    const double t = 0.1 * k;
    const Pose T = Pose::FromAxisAngle(Vec3::UnitZ(), 0.02 * k,
                                       Vec3(-4.0 + 0.3 * k, 0.1 * std::sin(k * 0.3), 1.5));
    truth.push_back(t, T);
    LidarScan scan{t, {}};
    const Pose inv = T.inverse();
    for (const auto& p : world) {
      if ((p - T.translation()).norm() > 8.0) continue;
      if (u01(rng) > 0.5) continue;
      scan.points.push_back(inv * p + Vec3(noise(rng), noise(rng), noise(rng)));
    }
    scans.push_back(std::move(scan));
  }
  PriorGenerationConfig cfg;
  cfg.initial_pose = perturb(truth[0].pose, rng, 0.1, 1.0 * kDegToRad);
  std::vector<double> image_times;
  for (int k = 0; k < 19; ++k) image_times.push_back(0.1 * k + 0.05);
  image_times.push_back(5.0);
  const auto out = generate_priors(scans, ref, image_times, Extrinsics{}, cfg);
  ASSERT_EQ(out.lidar_traj.size(), truth.size());
  for (std::size_t k = 0; k < truth.size(); ++k) {
    EXPECT_LT((out.lidar_traj[k].pose.translation() - truth[k].pose.translation()).norm(),
              0.01);
    EXPECT_LT(rot_deg(out.lidar_traj[k].pose, truth[k].pose), 0.2);
  }
  EXPECT_EQ(out.cam_priors.size(), 19u);
  ASSERT_EQ(out.dropped_image_times.size(), 1u);
  EXPECT_EQ(out.dropped_image_times[0], 5.0);
}

TEST(PriorGeneration, IdentityExtrinsicsAtScanTimesReproduceLidarPoses) {
  std::mt19937_64 rng(81);
  const auto world = room_world(rng);
  const CovCloud ref = compute_covariances(voxel_downsample(world, 0.1), 20);
  std::vector<LidarScan> scans;
  std::vector<double> times;
  for (int k = 0; k < 4; ++k) {
    const Pose T(Quat::Identity(), Vec3(0.2 * k, 0.0, 1.5));
    LidarScan scan{0.1 * k, {}};
    for (const auto& p : world) {
      if ((p - T.translation()).norm() < 8.0) scan.points.push_back(T.inverse() * p);
    }
    times.push_back(scan.timestamp);
    scans.push_back(std::move(scan));
  }
  PriorGenerationConfig cfg;
  cfg.initial_pose = Pose(Quat::Identity(), Vec3(0.0, 0.0, 1.5));
  const auto out = generate_priors(scans, ref, times, Extrinsics{}, cfg);
  ASSERT_EQ(out.cam_priors.size(), out.lidar_traj.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    EXPECT_EQ(out.cam_priors[k].timestamp, out.lidar_traj[k].timestamp);
    EXPECT_LT((out.cam_priors[k].pose.translation() - out.lidar_traj[k].pose.translation())
                  .norm(), 1e-15);
    EXPECT_LT((out.cam_priors[k].pose.rotation().coeffs() -
               out.lidar_traj[k].pose.rotation().coeffs()).norm(), 1e-15);
  }
}

TEST(PriorGeneration, LostWhenScansDoNotMatchTheMap) {
  std::mt19937_64 rng(91);
  const auto world = room_world(rng);
  const CovCloud ref = compute_covariances(voxel_downsample(world, 0.1), 20);
  std::vector<LidarScan> scans;
  for (int k = 0; k < 5; ++k) {
    LidarScan scan{0.1 * k, {}};
    for (const auto& p : corner_scene(500, 200 + k)) scan.points.push_back(p + Vec3(100, 0, 0));
    scans.push_back(std::move(scan));
  }
  try {
    generate_priors(scans, ref, {}, Extrinsics{}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTrackingLost);
  }
}

TEST(CloudIo, RoundTrips) {
  const auto pts = corner_scene(50, 3);
  const auto dir = std::filesystem::temp_directory_path();
  const std::string bin = (dir / "priorloc_rt_bin.ply").string();
  const std::string asc = (dir / "priorloc_rt_asc.ply").string();
  const std::string pcd = (dir / "priorloc_rt.pcd").string();
  write_ply(bin, pts, true);
  write_ply(asc, pts, false);
  write_pcd(pcd, pts);
  const auto a = read_point_cloud(bin);
  const auto b = read_point_cloud(asc);
  const auto c = read_point_cloud(pcd);
  ASSERT_EQ(a.size(), pts.size());
  ASSERT_EQ(b.size(), pts.size());
  ASSERT_EQ(c.size(), pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    EXPECT_EQ(a[i], pts[i]);
    EXPECT_LT((b[i] - pts[i]).norm(), 1e-15);
    EXPECT_LT((c[i] - pts[i]).norm(), 1e-6);
  }
  std::remove(bin.c_str());
  std::remove(asc.c_str());
  std::remove(pcd.c_str());
}

TEST(CloudIo, ParsesForeignPly) {
  const std::string text =
      "ply\nformat ascii 1.0\ncomment x\nelement vertex 2\nproperty float x\n"
      "property float y\nproperty float z\nproperty uchar red\nelement face 0\n"
      "property list uchar int vertex_indices\nend_header\n1 2 3 255\n4 5 6 0\n";
  const auto pts = parse_ply(std::vector<std::uint8_t>(text.begin(), text.end()));
  ASSERT_EQ(pts.size(), 2u);
  EXPECT_EQ(pts[1], Vec3(4, 5, 6));
  const std::string bad = "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\n"
                          "property float y\nproperty float z\nend_header\n1 2 3\n";
  EXPECT_THROW(parse_ply(std::vector<std::uint8_t>(bad.begin(), bad.end())), Error);
}

}  // namespace
}  // namespace priorloc
