#pragma once

#include <Eigen/Dense>

namespace oracle {

// Central differences of f: R^p -> R^m at x with step h.
template <typename F>
Eigen::MatrixXd central_jacobian(F&& f, const Eigen::VectorXd& x, double h) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd jac(f0.size(), x.size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Eigen::VectorXd up = x;
    Eigen::VectorXd down = x;
    up(k) += h;
    down(k) -= h;
    jac.col(k) = (f(up) - f(down)) / (2.0 * h);
  }
  return jac;
}

}  // namespace oracle
