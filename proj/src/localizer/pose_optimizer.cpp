#include "priorloc/localizer/pose_optimizer.hpp"

#include <cmath>

#include "priorloc/common/error.hpp"
#include "priorloc/mapper/bundle_problem.hpp"

namespace priorloc {

namespace {

Eigen::Matrix<double, 6, 1> prior_scale(const PoseOptConfig& cfg) {
  Eigen::Matrix<double, 6, 1> s;
  s << Vec3::Constant(1.0 / cfg.sigma_prior_t), Vec3::Constant(1.0 / cfg.sigma_prior_r);
  return s;
}

/// Robust cost and IRLS weight per residual block (one block per
/// correspondence, then the prior block).
double block_cost(const Eigen::VectorXd& r, std::size_t n, const PoseOptConfig& cfg,
                  std::vector<double>* weights) {
  const Huber visual{cfg.huber_pixel / cfg.sigma_pixel};
  const Huber prior{cfg.huber_prior};
  double cost = 0.0;
  if (weights) weights->clear();
  for (std::size_t i = 0; i < n; ++i) {
    const double s = r.segment<2>(2 * i).squaredNorm();
    cost += 0.5 * visual.rho(s);
    if (weights) weights->push_back(visual.weight(s));
  }
  if (cfg.use_prior) {
    const double s = r.tail<6>().squaredNorm();
    cost += 0.5 * prior.rho(s);
    if (weights) weights->push_back(prior.weight(s));
  }
  return cost;
}

}  // namespace

void PoseOptConfig::validate() const {
  if (!(sigma_pixel > 0.0) || !(huber_pixel > 0.0) || !(sigma_prior_t > 0.0) ||
      !(sigma_prior_r > 0.0) || !(huber_prior > 0.0) || !(outlier_sigma > 0.0) ||
      max_iterations < 0 || !(initial_lambda > 0.0)) {
    throw Error(ErrorCode::kConfig, "pose optimizer: invalid configuration");
  }
}

std::size_t PoseOptResult::inlier_count() const {
  std::size_t n = 0;
  for (bool o : outlier) n += o ? 0 : 1;
  return n;
}

Eigen::VectorXd pose_only_residuals(std::span<const Correspondence> corrs, const Pose& T,
                                    const Pose& prior, const Intrinsics& K,
                                    const PoseOptConfig& cfg, Eigen::MatrixXd* J) {
  const std::size_t n = corrs.size();
  const Eigen::Index rows = static_cast<Eigen::Index>(2 * n + (cfg.use_prior ? 6 : 0));
  Eigen::VectorXd r(rows);
  if (J) J->setZero(rows, 6);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Index row = static_cast<Eigen::Index>(2 * i);
    Vec2 e;
    Mat26 Jp;
    if (visual_residual(K, T, corrs[i].point, corrs[i].pixel, &e, J ? &Jp : nullptr)) {
      r.segment<2>(row) = e / cfg.sigma_pixel;
      if (J) J->block<2, 6>(row, 0) = Jp / cfg.sigma_pixel;
    } else {
      r.segment<2>(row) = Vec2(kBehindCameraResidual, 0.0);
    }
  }
  if (cfg.use_prior) {
    const Eigen::Matrix<double, 6, 1> s = prior_scale(cfg);
    Mat6 Jp;
    const Vec6 e = prior_residual(T, prior, J ? &Jp : nullptr);
    r.tail<6>() = s.cwiseProduct(e);
    if (J) J->bottomRows<6>() = s.asDiagonal() * Jp;
  }
  return r;
}

double pose_only_cost(std::span<const Correspondence> corrs, const Pose& T, const Pose& prior,
                      const Intrinsics& K, const PoseOptConfig& cfg) {
  return block_cost(pose_only_residuals(corrs, T, prior, K, cfg), corrs.size(), cfg, nullptr);
}

namespace {

/// LM from `start`; appends accepted costs to `history`.
Pose run_lm(std::span<const Correspondence> corrs, const Pose& start, const Pose& Tbar,
            const Intrinsics& K, const PoseOptConfig& cfg, std::vector<double>& history,
            int& iterations) {
  const std::size_t n = corrs.size();
  Pose T = start;
  Eigen::MatrixXd J;
  std::vector<double> w;
  Eigen::VectorXd r = pose_only_residuals(corrs, T, Tbar, K, cfg, &J);
  double cost = block_cost(r, n, cfg, &w);
  double lambda = cfg.initial_lambda;
  bool done = false;
  for (int it = 0; it < cfg.max_iterations && !done; ++it) {
    ++iterations;
    Mat6 H = Mat6::Zero();
    Vec6 g = Vec6::Zero();
    for (std::size_t b = 0; b < w.size(); ++b) {
      const Eigen::Index row = static_cast<Eigen::Index>(2 * b);
      const Eigen::Index len = b == n ? 6 : 2;  // the prior block comes last
      const auto Jb = J.middleRows(row, len);
      H.noalias() += w[b] * Jb.transpose() * Jb;
      g.noalias() += w[b] * Jb.transpose() * r.segment(row, len);
    }
    bool accepted = false;
    while (!accepted && lambda < 1e12) {
      Mat6 A = H;
      A.diagonal() += lambda * H.diagonal().cwiseMax(1e-9);
      const Vec6 delta = A.ldlt().solve(-g);
      if (!delta.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      const Pose candidate = apply_pose_update(T, delta);
      Eigen::MatrixXd Jc;
      std::vector<double> wc;
      const Eigen::VectorXd rc = pose_only_residuals(corrs, candidate, Tbar, K, cfg, &Jc);
      const double cc = block_cost(rc, n, cfg, &wc);
      if (cc < cost) {
        const double decrease = cost - cc;
        T = candidate;
        r = rc;
        J = std::move(Jc);
        w = std::move(wc);
        cost = cc;
        history.push_back(cost);
        lambda = std::max(lambda * 0.3, 1e-12);
        accepted = true;
        done = decrease <= cfg.function_tolerance * cost || delta.norm() <= cfg.step_tolerance;
      } else {
        lambda *= 10.0;
      }
    }
    done = done || !accepted;
  }
  return T;
}

std::vector<bool> flag_outliers(std::span<const Correspondence> corrs, const Pose& T,
                                const Intrinsics& K, const PoseOptConfig& cfg) {
  const double gate = cfg.outlier_sigma * cfg.sigma_pixel;
  std::vector<bool> out(corrs.size());
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const auto px = try_project(K, T, corrs[i].point);
    out[i] = !px || (*px - corrs[i].pixel).norm() > gate;
  }
  return out;
}

}  // namespace

PoseOptResult pose_optimize(std::span<const Correspondence> corrs, const Pose& Tbar,
                            const Intrinsics& K, const PoseOptConfig& cfg) {
  cfg.validate();
  if (corrs.size() < 4) {
    throw Error(ErrorCode::kTooFewAssociations,
                "pose optimization needs 4 associations, got " + std::to_string(corrs.size()));
  }
  PoseOptResult out;
  out.initial_cost = pose_only_cost(corrs, Tbar, Tbar, K, cfg);
  out.cost_history.push_back(out.initial_cost);
  Pose T = run_lm(corrs, Tbar, Tbar, K, cfg, out.cost_history, out.iterations);
  out.outlier = flag_outliers(corrs, T, K, cfg);
  std::vector<Correspondence> kept;
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    if (!out.outlier[i]) kept.push_back(corrs[i]);
  }
  if (cfg.refit_inliers && kept.size() < corrs.size() && kept.size() >= 4) {
    out.cost_history.push_back(pose_only_cost(kept, T, Tbar, K, cfg));
    T = run_lm(kept, T, Tbar, K, cfg, out.cost_history, out.iterations);
    out.outlier = flag_outliers(corrs, T, K, cfg);
  }
  out.pose = T;
  out.final_cost = out.cost_history.back();
  if (out.final_cost > out.initial_cost) {
    throw Error(ErrorCode::kDiverged, "pose optimization increased the cost");
  }
  return out;
}

}  // namespace priorloc
