#include "priorloc/mapper/bundle_problem.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>

namespace priorloc {

std::size_t BundleProblem::add_pose(const Pose& T, bool fixed) {
  poses.push_back(T);
  pose_fixed.push_back(fixed);
  return poses.size() - 1;
}

std::size_t BundleProblem::add_point(const Vec3& p, bool fixed) {
  points.push_back(p);
  point_fixed.push_back(fixed);
  return points.size() - 1;
}

namespace {

double visual_cost(const BundleProblem& pb, const VisualTerm& v) {
  Vec2 r;
  if (!visual_residual(pb.K, pb.poses[v.camera], pb.points[v.point], v.measurement, &r)) {
    return 0.5 * v.kernel.rho(kBehindCameraResidual * kBehindCameraResidual);
  }
  return 0.5 * v.kernel.rho((r / v.sigma).squaredNorm());
}

Vec6 whitened_prior(const PriorTerm& p, const Pose& T, Mat6* J) {
  Vec6 r = prior_residual(T, p.prior, J);
  Vec6 scale;
  scale << Vec3::Constant(1.0 / p.sigma_t), Vec3::Constant(1.0 / p.sigma_r);
  if (J) *J = scale.asDiagonal() * (*J);
  return scale.asDiagonal() * r;
}

// Free-variable indexing.
struct Layout {
  std::vector<int> cam;    // -1 when fixed
  std::vector<int> point;  // -1 when fixed
  int n_cam = 0;
  int n_point = 0;
};

Layout make_layout(const BundleProblem& pb) {
  Layout l;
  l.cam.assign(pb.poses.size(), -1);
  l.point.assign(pb.points.size(), -1);
  for (std::size_t i = 0; i < pb.poses.size(); ++i) {
    if (!pb.pose_fixed[i]) l.cam[i] = l.n_cam++;
  }
  for (std::size_t j = 0; j < pb.points.size(); ++j) {
    if (!pb.point_fixed[j]) l.point[j] = l.n_point++;
  }
  return l;
}

struct CrossBlock {
  int cam;
  Eigen::Matrix<double, 6, 3> W;
};

// Normal equations split into camera, point, and cross blocks.
struct Normals {
  Eigen::MatrixXd Hcc;
  Eigen::VectorXd bc;
  std::vector<Mat3> Hpp;
  std::vector<Vec3> bp;
  std::vector<std::vector<CrossBlock>> cross;  // per free point
};

void add_cross(std::vector<CrossBlock>& blocks, int cam, const Eigen::Matrix<double, 6, 3>& W) {
  for (auto& b : blocks) {
    if (b.cam == cam) {
      b.W += W;
      return;
    }
  }
  blocks.push_back({cam, W});
}

Normals build_normals(const BundleProblem& pb, const Layout& l) {
  Normals n;
  n.Hcc = Eigen::MatrixXd::Zero(6 * l.n_cam, 6 * l.n_cam);
  n.bc = Eigen::VectorXd::Zero(6 * l.n_cam);
  n.Hpp.assign(static_cast<std::size_t>(l.n_point), Mat3::Zero());
  n.bp.assign(static_cast<std::size_t>(l.n_point), Vec3::Zero());
  n.cross.resize(static_cast<std::size_t>(l.n_point));

  for (const auto& v : pb.visual) {
    const int ci = l.cam[v.camera], pj = l.point[v.point];
    if (ci < 0 && pj < 0) continue;
    Vec2 r;
    Mat26 Jc;
    Mat23 Jp;
    if (!visual_residual(pb.K, pb.poses[v.camera], pb.points[v.point], v.measurement, &r, &Jc,
                         &Jp)) {
      continue;
    }
    const double inv = 1.0 / v.sigma;
    const double w = v.kernel.weight((r * inv).squaredNorm()) * inv * inv;
    if (ci >= 0) {
      n.Hcc.block<6, 6>(6 * ci, 6 * ci) += w * Jc.transpose() * Jc;
      n.bc.segment<6>(6 * ci) += w * Jc.transpose() * r;
    }
    if (pj >= 0) {
      n.Hpp[pj] += w * Jp.transpose() * Jp;
      n.bp[pj] += w * Jp.transpose() * r;
      if (ci >= 0) add_cross(n.cross[pj], ci, w * Jc.transpose() * Jp);
    }
  }
  for (const auto& s : pb.structure) {
    const int pj = l.point[s.point];
    if (pj < 0) continue;
    const Vec3 r = structure_residual(pb.points[s.point], s.target);
    const double inv = 1.0 / s.sigma;
    const double w = s.kernel.weight((r * inv).squaredNorm()) * inv * inv;
    n.Hpp[pj] += w * Mat3::Identity();
    n.bp[pj] += w * r;
  }
  for (const auto& p : pb.priors) {
    const int ci = l.cam[p.camera];
    if (ci < 0) continue;
    Mat6 J;
    const Vec6 r = whitened_prior(p, pb.poses[p.camera], &J);
    const double w = p.kernel.weight(r.squaredNorm());
    n.Hcc.block<6, 6>(6 * ci, 6 * ci) += w * J.transpose() * J;
    n.bc.segment<6>(6 * ci) += w * J.transpose() * r;
  }
  return n;
}

// Solves (H + lambda D) x = -b through the point Schur complement.
bool solve_damped(const Normals& n, double lambda, Eigen::VectorXd& dc,
                  std::vector<Vec3>& dp) {
  const auto np = n.Hpp.size();
  const auto damp = [lambda](double d) { return lambda * std::clamp(d, 1e-6, 1e32); };
  std::vector<Mat3> Hpp_inv(np);
  for (std::size_t j = 0; j < np; ++j) {
    Mat3 H = n.Hpp[j];
    for (int k = 0; k < 3; ++k) H(k, k) += damp(n.Hpp[j](k, k));
    Eigen::LDLT<Mat3> ldlt(H);
    if (ldlt.info() != Eigen::Success) return false;
    Hpp_inv[j] = ldlt.solve(Mat3::Identity());
    if (!Hpp_inv[j].allFinite()) return false;
  }
  Eigen::MatrixXd S = n.Hcc;
  for (Eigen::Index k = 0; k < S.rows(); ++k) S(k, k) += damp(n.Hcc(k, k));
  Eigen::VectorXd rhs = -n.bc;
  for (std::size_t j = 0; j < np; ++j) {
    const auto& blocks = n.cross[j];
    for (const auto& a : blocks) {
      const Eigen::Matrix<double, 6, 3> WaHinv = a.W * Hpp_inv[j];
      rhs.segment<6>(6 * a.cam) += WaHinv * n.bp[j];
      for (const auto& b : blocks) {
        S.block<6, 6>(6 * a.cam, 6 * b.cam) -= WaHinv * b.W.transpose();
      }
    }
  }
  dc.resize(S.rows());
  if (S.rows() > 0) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
    if (ldlt.info() != Eigen::Success) return false;
    dc = ldlt.solve(rhs);
    if (!dc.allFinite()) return false;
  }
  dp.resize(np);
  for (std::size_t j = 0; j < np; ++j) {
    Vec3 r = -n.bp[j];
    for (const auto& a : n.cross[j]) r -= a.W.transpose() * dc.segment<6>(6 * a.cam);
    dp[j] = Hpp_inv[j] * r;
  }
  return true;
}

}  // namespace

double robust_cost(const BundleProblem& pb) {
  double cost = 0.0;
  for (const auto& v : pb.visual) cost += visual_cost(pb, v);
  for (const auto& s : pb.structure) {
    cost += 0.5 * s.kernel.rho(
                      (structure_residual(pb.points[s.point], s.target) / s.sigma).squaredNorm());
  }
  for (const auto& p : pb.priors) {
    cost += 0.5 * p.kernel.rho(whitened_prior(p, pb.poses[p.camera], nullptr).squaredNorm());
  }
  return cost;
}

LmReport solve_bundle(BundleProblem& pb, const LmConfig& cfg) {
  const Layout layout = make_layout(pb);
  LmReport rep;
  double cost = robust_cost(pb);
  rep.initial_cost = cost;
  rep.cost_history.push_back(cost);
  double lambda = cfg.initial_lambda;
  if (layout.n_cam == 0 && layout.n_point == 0) {
    rep.final_cost = cost;
    rep.converged = true;
    return rep;
  }

  for (int it = 0; it < cfg.max_iterations; ++it) {
    ++rep.iterations;
    const Normals n = build_normals(pb, layout);
    bool accepted = false;
    while (lambda <= cfg.max_lambda) {
      Eigen::VectorXd dc;
      std::vector<Vec3> dp;
      if (!solve_damped(n, lambda, dc, dp)) {
        lambda *= cfg.lambda_increase;
        continue;
      }
      double step2 = dc.squaredNorm();
      for (const auto& d : dp) step2 += d.squaredNorm();

      std::vector<Pose> old_poses = pb.poses;
      std::vector<Vec3> old_points = pb.points;
      for (std::size_t i = 0; i < pb.poses.size(); ++i) {
        if (layout.cam[i] >= 0) {
          pb.poses[i] = apply_pose_update(pb.poses[i], dc.segment<6>(6 * layout.cam[i]));
        }
      }
      for (std::size_t j = 0; j < pb.points.size(); ++j) {
        if (layout.point[j] >= 0) pb.points[j] += dp[static_cast<std::size_t>(layout.point[j])];
      }
      const double new_cost = robust_cost(pb);
      if (new_cost < cost) {
        const double rel = (cost - new_cost) / std::max(cost, 1e-300);
        cost = new_cost;
        rep.cost_history.push_back(cost);
        ++rep.accepted_steps;
        lambda = std::max(lambda * cfg.lambda_decrease, 1e-12);
        accepted = true;
        if (rel < cfg.function_tolerance || std::sqrt(step2) < cfg.step_tolerance) {
          rep.converged = true;
        }
        break;
      }
      pb.poses = std::move(old_poses);
      pb.points = std::move(old_points);
      if (std::sqrt(step2) < cfg.step_tolerance) break;
      lambda *= cfg.lambda_increase;
    }
    if (!accepted) {
      rep.converged = true;
      break;
    }
    if (rep.converged) break;
  }
  rep.final_cost = cost;
  return rep;
}

Eigen::MatrixXd dense_hessian(const BundleProblem& pb) {
  const Layout l = make_layout(pb);
  const Normals n = build_normals(pb, l);
  const int nc = 6 * l.n_cam;
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(nc + 3 * l.n_point, nc + 3 * l.n_point);
  H.topLeftCorner(nc, nc) = n.Hcc;
  for (int j = 0; j < l.n_point; ++j) {
    H.block<3, 3>(nc + 3 * j, nc + 3 * j) = n.Hpp[static_cast<std::size_t>(j)];
    for (const auto& a : n.cross[static_cast<std::size_t>(j)]) {
      H.block<6, 3>(6 * a.cam, nc + 3 * j) = a.W;
      H.block<3, 6>(nc + 3 * j, 6 * a.cam) = a.W.transpose();
    }
  }
  return H;
}

}  // namespace priorloc
