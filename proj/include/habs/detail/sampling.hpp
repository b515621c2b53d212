/*
 * sampling.hpp
 */
#pragma once

#include <cmath>
#include <random>

namespace habs {

template <class Rng>
Vec sample_ball(Rng& rng, const Vec& center, double radius) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto n = center.size();
  Vec dir(n);
  double norm = 0.0;
  do {
    for (Eigen::Index k = 0; k < n; ++k) dir[k] = gauss(rng);
    norm = dir.norm();
  } while (norm == 0.0);
  const double rho = radius * std::pow(unif(rng), 1.0 / static_cast<double>(n));
  Vec out = center + (rho / norm) * dir;
  // keep the sample inside despite rounding
  const double d = (out - center).norm();
  if (d > radius && d > 0.0) out = center + (radius / d) * (out - center);
  return out;
}

}  // namespace habs
