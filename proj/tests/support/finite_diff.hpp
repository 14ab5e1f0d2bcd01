#pragma once

#include <Eigen/Core>
#include <algorithm>

namespace priorloc::testing {

/// Central-difference Jacobian of f: R^n -> R^m at x.
template <typename F>
Eigen::MatrixXd numeric_jacobian(F&& f, const Eigen::VectorXd& x, double h = 1e-6) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd J(f0.size(), x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    J.col(i) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return J;
}

/// ||A - B|| / max(||B||, floor), Frobenius norms.
inline double relative_error(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                             double floor = 1e-6) {
  return (A - B).norm() / std::max(B.norm(), floor);
}

}  // namespace priorloc::testing
