/*
 * rk4.hpp
 *
 *  Classical fixed-step Runge-Kutta. `f(t, y)` returns dy/dt.
 */
#pragma once

#include <Eigen/Dense>

namespace habs::detail {

template <class F>
Eigen::VectorXd rk4_step(F&& f, double t, const Eigen::VectorXd& y, double h) {
  const Eigen::VectorXd k1 = f(t, y);
  const Eigen::VectorXd k2 = f(t + 0.5 * h, Eigen::VectorXd(y + (0.5 * h) * k1));
  const Eigen::VectorXd k3 = f(t + 0.5 * h, Eigen::VectorXd(y + (0.5 * h) * k2));
  const Eigen::VectorXd k4 = f(t + h, Eigen::VectorXd(y + h * k3));
  return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Integrates over [t0, t0 + span] with `steps` equal steps, returns the endpoint.
template <class F>
Eigen::VectorXd rk4_integrate(F&& f, double t0, Eigen::VectorXd y, double span, int steps) {
  const double h = span / steps;
  for (int k = 0; k < steps; ++k) y = rk4_step(f, t0 + k * h, y, h);
  return y;
}

}  // namespace habs::detail
