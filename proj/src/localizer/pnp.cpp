#include "priorloc/localizer/pnp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include "priorloc/common/error.hpp"
#include "priorloc/common/random.hpp"

namespace priorloc {

namespace {

/// Real roots of a4 x^4 + ... + a0 from the companion matrix.
std::vector<double> real_quartic_roots(double a4, double a3, double a2, double a1, double a0) {
  std::vector<double> roots;
  const double scale = std::max({std::abs(a4), std::abs(a3), std::abs(a2), std::abs(a1),
                                 std::abs(a0)});
  if (!(scale > 0.0) || std::abs(a4) < 1e-12 * scale) return roots;
  Eigen::Matrix4d C = Eigen::Matrix4d::Zero();
  C(0, 0) = -a3 / a4;
  C(0, 1) = -a2 / a4;
  C(0, 2) = -a1 / a4;
  C(0, 3) = -a0 / a4;
  C(1, 0) = C(2, 1) = C(3, 2) = 1.0;
  const Eigen::EigenSolver<Eigen::Matrix4d> es(C, false);
  for (int i = 0; i < 4; ++i) {
    const auto z = es.eigenvalues()[i];
    if (std::abs(z.imag()) <= 1e-6 * std::max(1.0, std::abs(z.real()))) {
      double x = z.real();
      // Newton polish on the quartic.
      for (int k = 0; k < 5; ++k) {
        const double f = (((a4 * x + a3) * x + a2) * x + a1) * x + a0;
        const double d = ((4 * a4 * x + 3 * a3) * x + 2 * a2) * x + a1;
        if (d == 0.0) break;
        x -= f / d;
      }
      roots.push_back(x);
    }
  }
  return roots;
}

/// Gauss-Newton on the three law-of-cosines constraints for depths s.
void polish_depths(Vec3& s, const Vec3& cosines, const Vec3& dist2) {
  // pairs (1,2) -> c, (0,2) -> b, (0,1) -> a, indexed as in `cosines`.
  const int pi[3] = {1, 0, 0};
  const int pj[3] = {2, 2, 1};
  for (int it = 0; it < 5; ++it) {
    Vec3 f;
    Mat3 J = Mat3::Zero();
    for (int k = 0; k < 3; ++k) {
      const int i = pi[k], j = pj[k];
      f[k] = s[i] * s[i] + s[j] * s[j] - 2 * s[i] * s[j] * cosines[k] - dist2[k];
      J(k, i) = 2 * s[i] - 2 * s[j] * cosines[k];
      J(k, j) = 2 * s[j] - 2 * s[i] * cosines[k];
    }
    const Vec3 step = J.fullPivLu().solve(-f);
    if (!step.allFinite()) return;
    s += step;
    if (step.norm() < 1e-15 * s.norm()) return;
  }
}

std::uint64_t hash_double(std::uint64_t h, double v) {
  return mix64(h ^ std::bit_cast<std::uint64_t>(v));
}

/// Squared reprojection error, infinite behind the camera.
double reprojection2(const Intrinsics& K, const Pose& T, const Correspondence& c) {
  const auto px = try_project(K, T, c.point);
  return px ? (*px - c.pixel).squaredNorm() : std::numeric_limits<double>::infinity();
}

}  // namespace

std::vector<Pose> p3p(const std::array<Vec3, 3>& bearings, const std::array<Vec3, 3>& points) {
  std::vector<Pose> out;
  const Vec3& P1 = points[0];
  const Vec3& P2 = points[1];
  const Vec3& P3 = points[2];
  const double a2 = (P2 - P3).squaredNorm();
  const double b2 = (P1 - P3).squaredNorm();
  const double c2 = (P1 - P2).squaredNorm();
  if ((P2 - P1).cross(P3 - P1).norm() < 1e-10 * std::max(1.0, b2 + c2)) return out;
  const Vec3 j1 = bearings[0].normalized();
  const Vec3 j2 = bearings[1].normalized();
  const Vec3 j3 = bearings[2].normalized();
  const double ca = j2.dot(j3);
  const double cb = j1.dot(j3);
  const double cg = j1.dot(j2);

  // Grunert's quartic in v = s3/s1 (with u = s2/s1).
  const double amc = (a2 - c2) / b2;
  const double apc = (a2 + c2) / b2;
  const double A4 = (amc - 1) * (amc - 1) - 4 * c2 / b2 * ca * ca;
  const double A3 = 4 * (amc * (1 - amc) * cb - (1 - apc) * ca * cg + 2 * c2 / b2 * ca * ca * cb);
  const double A2 = 2 * (amc * amc - 1 + 2 * amc * amc * cb * cb + 2 * (b2 - c2) / b2 * ca * ca -
                         4 * apc * ca * cb * cg + 2 * (b2 - a2) / b2 * cg * cg);
  const double A1 = 4 * (-amc * (1 + amc) * cb + 2 * a2 / b2 * cg * cg * cb - (1 - apc) * ca * cg);
  const double A0 = (1 + amc) * (1 + amc) - 4 * a2 / b2 * cg * cg;

  const Vec3 cosines(ca, cb, cg);
  const Vec3 dist2(a2, b2, c2);
  for (double v : real_quartic_roots(A4, A3, A2, A1, A0)) {
    if (!(v > 0.0)) continue;
    const double den = 2 * (cg - v * ca);
    if (std::abs(den) < 1e-12) continue;
    const double u = ((-1 + amc) * v * v - 2 * amc * cb * v + 1 + amc) / den;
    if (!(u > 0.0)) continue;
    const double q = 1 + v * v - 2 * v * cb;
    if (!(q > 0.0)) continue;
    const double s1 = std::sqrt(b2 / q);
    Vec3 s(s1, u * s1, v * s1);
    polish_depths(s, cosines, dist2);
    if (!(s.minCoeff() > 0.0) || !s.allFinite()) continue;
    Mat3 X, W;
    X << s[0] * j1, s[1] * j2, s[2] * j3;
    W << P1, P2, P3;
    const Eigen::Matrix4d A = Eigen::umeyama(X, W, false);
    const Pose T = Pose::FromMatrix(A.topLeftCorner<3, 3>(), A.topRightCorner<3, 1>());
    if (T.is_finite()) out.push_back(T);
  }
  return out;
}

void PnpConfig::validate() const {
  if (!(reproj_gate > 0.0) || !(confidence > 0.0 && confidence < 1.0) || max_iterations < 1 ||
      min_inliers < 4) {
    throw Error(ErrorCode::kConfig, "pnp: invalid configuration");
  }
}

PnpResult pnp_ransac(std::span<const Correspondence> input, const Intrinsics& K,
                     const PnpConfig& cfg) {
  cfg.validate();
  const std::size_t n = input.size();
  if (n < 4) {
    throw Error(ErrorCode::kTooFewPoints,
                "pnp needs 4 correspondences, got " + std::to_string(n));
  }
  // Canonical order, so sampling does not depend on the caller's order.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto key = [&](std::size_t i) {
    const Correspondence& c = input[i];
    return std::array<double, 5>{c.pixel.x(), c.pixel.y(), c.point.x(), c.point.y(),
                                 c.point.z()};
  };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
  std::vector<Correspondence> corrs(n);
  std::uint64_t h = cfg.seed;
  for (std::size_t k = 0; k < n; ++k) {
    corrs[k] = input[order[k]];
    for (double v : key(order[k])) h = hash_double(h, v);
  }
  std::vector<Vec3> bearings(n);
  for (std::size_t k = 0; k < n; ++k) bearings[k] = K.bearing(corrs[k].pixel);

  const double gate2 = cfg.reproj_gate * cfg.reproj_gate;
  std::mt19937_64 rng(derive_seed({cfg.seed, h}));
  Pose best;
  double best_score = std::numeric_limits<double>::infinity();
  std::size_t best_inliers = 0;
  double needed = static_cast<double>(cfg.max_iterations);
  int it = 0;
  for (; it < cfg.max_iterations && it < needed; ++it) {
    std::array<std::size_t, 3> idx{};
    for (int k = 0; k < 3; ++k) {
      bool fresh = false;
      while (!fresh) {
        idx[k] = static_cast<std::size_t>(rng() % n);
        fresh = std::find(idx.begin(), idx.begin() + k, idx[k]) == idx.begin() + k;
      }
    }
    const auto hypotheses =
        p3p({bearings[idx[0]], bearings[idx[1]], bearings[idx[2]]},
            {corrs[idx[0]].point, corrs[idx[1]].point, corrs[idx[2]].point});
    for (const Pose& T : hypotheses) {
      double score = 0.0;
      std::size_t inliers = 0;
      for (const Correspondence& c : corrs) {
        const double e2 = reprojection2(K, T, c);
        if (e2 < gate2) {
          ++inliers;
          score += e2;
        } else {
          score += gate2;
        }
        if (score >= best_score) break;
      }
      if (score < best_score) {
        best_score = score;
        best = T;
        best_inliers = inliers;
        const double w = static_cast<double>(inliers) / static_cast<double>(n);
        const double miss = 1.0 - w * w * w;
        needed = miss <= 0.0 ? 0.0
                             : std::log(1.0 - cfg.confidence) / std::log(std::max(miss, 1e-300));
      }
    }
  }

  PnpResult out;
  out.iterations = it;
  const auto inlier_mask = [&](const Pose& T, std::size_t* count) {
    std::vector<bool> mask(n);
    *count = 0;
    for (std::size_t k = 0; k < n; ++k) {
      mask[k] = reprojection2(K, T, corrs[k]) < gate2;
      *count += mask[k] ? 1 : 0;
    }
    return mask;
  };
  std::vector<bool> mask = inlier_mask(best, &best_inliers);
  if (cfg.refine && best_inliers >= 4) {
    PoseOptConfig refine;
    refine.use_prior = false;
    refine.huber_pixel = cfg.reproj_gate;
    for (int pass = 0; pass < 2; ++pass) {
      std::vector<Correspondence> in;
      for (std::size_t k = 0; k < n; ++k) {
        if (mask[k]) in.push_back(corrs[k]);
      }
      const Pose T = pose_optimize(in, best, K, refine).pose;
      std::size_t count = 0;
      std::vector<bool> m = inlier_mask(T, &count);
      if (count < best_inliers) break;
      best = T;
      best_inliers = count;
      mask = std::move(m);
    }
  }
  if (best_inliers < static_cast<std::size_t>(cfg.min_inliers)) {
    throw Error(ErrorCode::kRansacFailed, "pnp: " + std::to_string(best_inliers) +
                                              " inliers, need " +
                                              std::to_string(cfg.min_inliers));
  }
  out.pose = best;
  out.inlier_count = best_inliers;
  out.inlier.assign(n, false);
  for (std::size_t k = 0; k < n; ++k) out.inlier[order[k]] = mask[k];
  return out;
}

}  // namespace priorloc
