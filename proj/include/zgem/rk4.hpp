#pragma once

#include <Eigen/Dense>

namespace zgem {

/// One classic fixed-step RK4 step of y' = f(t, y) over vector-packed states.
/// f must return a vector of the same size as y.
template <typename F>
Eigen::VectorXd rk4_step(const Eigen::VectorXd& y, double t, double dt, F&& f) {
  const Eigen::VectorXd k1 = f(t, y);
  const Eigen::VectorXd k2 = f(t + 0.5 * dt, y + (0.5 * dt) * k1);
  const Eigen::VectorXd k3 = f(t + 0.5 * dt, y + (0.5 * dt) * k2);
  const Eigen::VectorXd k4 = f(t + dt, y + dt * k3);
  return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace zgem
