#include "priorloc/registration/gicp.hpp"

#include <cmath>

#include "priorloc/common/error.hpp"

namespace priorloc {
namespace {

struct Correspondence {
  std::uint32_t source;
  std::uint32_t target;
  Mat3 weight;  // (C_t + R C_s R^T)^-1
};

std::vector<Correspondence> associate(const CovCloud& source, const CovCloud& target,
                                      const Pose& T, double gate) {
  std::vector<Correspondence> out;
  out.reserve(source.size());
  const Mat3 R = T.rotation_matrix();
  for (std::size_t i = 0; i < source.size(); ++i) {
    const Vec3 p = T * source.points()[i];
    const auto nn = target.index().nearest(p, gate);
    if (!nn) continue;
    const Mat3 C = target.covariances()[nn->index] +
                   R * source.covariances()[i] * R.transpose();
    Mat3 W = C.inverse();
    W = 0.5 * (W + W.transpose());
    out.push_back({static_cast<std::uint32_t>(i), nn->index, W});
  }
  return out;
}

double total_cost(const CovCloud& source, const CovCloud& target, const Pose& T,
                  const std::vector<Correspondence>& corr) {
  double cost = 0.0;
  for (const auto& c : corr) {
    const Vec3 d = gicp_residual(T, source.points()[c.source], target.points()[c.target]);
    cost += d.dot(c.weight * d);
  }
  return cost;
}

Vec3 centroid(const std::vector<Vec3>& pts) {
  Vec3 c = Vec3::Zero();
  for (const auto& p : pts) c += p;
  return pts.empty() ? c : Vec3(c / static_cast<double>(pts.size()));
}

}  // namespace

void GicpConfig::validate() const {
  if (!(max_correspondence_distance > 0.0) || max_iterations < 1 ||
      !(tol_translation > 0.0) || !(tol_rotation > 0.0) || max_step_halvings < 0) {
    throw Error(ErrorCode::kConfig, "invalid gicp configuration");
  }
}

Vec3 gicp_residual(const Pose& T, const Vec3& source, const Vec3& target) {
  return target - T * source;
}

Eigen::Matrix<double, 3, 6> gicp_jacobian(const Pose& T, const Vec3& source) {
  // d/dxi of -(Exp(xi) p) at zero: -[I, -[p]x] with p = T * source.
  Eigen::Matrix<double, 3, 6> J;
  J.leftCols<3>() = -Mat3::Identity();
  J.rightCols<3>() = skew(T * source);
  return J;
}

GicpResult gicp(const CovCloud& source, const CovCloud& target, const Pose& T_init,
                const GicpConfig& cfg) {
  cfg.validate();
  if (source.empty() || target.empty()) {
    throw Error(ErrorCode::kTooFewPoints, "gicp needs non-empty clouds");
  }
  if (!T_init.is_finite()) throw Error(ErrorCode::kConfig, "initial pose is not finite");

  const Vec3 src_centroid = centroid(source.points());
  GicpResult result;
  Pose T = T_init;

  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    const auto corr = associate(source, target, T, cfg.max_correspondence_distance);
    if (corr.empty()) {
      throw Error(ErrorCode::kNoCorrespondences, "no correspondence within gating radius");
    }
    Mat6 H = Mat6::Zero();
    Vec6 g = Vec6::Zero();
    for (const auto& c : corr) {
      const Vec3 d = gicp_residual(T, source.points()[c.source], target.points()[c.target]);
      const auto J = gicp_jacobian(T, source.points()[c.source]);
      const Eigen::Matrix<double, 6, 3> JtW = J.transpose() * c.weight;
      H += JtW * J;
      g += JtW * d;
    }
    const double cost0 = total_cost(source, target, T, corr);
    Vec6 xi = H.ldlt().solve(-g);
    if (!xi.allFinite()) xi = H.completeOrthogonalDecomposition().solve(-g);

    // Backtrack so the cost at fixed associations never increases.
    Pose candidate = T;
    double cost1 = cost0;
    bool accepted = false;
    for (int h = 0; h <= cfg.max_step_halvings; ++h) {
      candidate = se3_exp(xi) * T;
      cost1 = total_cost(source, target, candidate, corr);
      if (cost1 <= cost0) {
        accepted = true;
        break;
      }
      xi *= 0.5;
    }
    ++result.iterations;
    if (!accepted) {
      result.history.push_back({corr.size(), cost0, cost0});
      result.converged = true;
      break;
    }
    result.history.push_back({corr.size(), cost0, cost1});
    const double d_rot = xi.tail<3>().norm();
    const double d_trans = (candidate * src_centroid - T * src_centroid).norm();
    T = candidate;
    if (d_rot < cfg.tol_rotation && d_trans < cfg.tol_translation) {
      result.converged = true;
      break;
    }
  }

  const auto corr = associate(source, target, T, cfg.max_correspondence_distance);
  if (corr.empty()) {
    throw Error(ErrorCode::kNoCorrespondences, "no correspondence within gating radius");
  }
  for (const auto& c : corr) {
    const auto J = gicp_jacobian(T, source.points()[c.source]);
    result.hessian += J.transpose() * c.weight * J;
  }
  result.pose = T;
  result.correspondences = corr.size();
  result.final_cost = total_cost(source, target, T, corr) / static_cast<double>(corr.size());
  return result;
}

}  // namespace priorloc
