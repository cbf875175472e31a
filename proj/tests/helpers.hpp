#pragma once

#include <Eigen/Core>
#include <cmath>
#include <random>

#include "drokit/rng.hpp"

namespace drokit::testing {

inline Eigen::VectorXd uniform_weights(std::ptrdiff_t n) {
  return Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
}

// Entries bounded away from 0 so divergence terms stay well conditioned.
inline Eigen::VectorXd random_weights(rng_t& rng, std::ptrdiff_t n) {
  std::uniform_real_distribution<double> uniform(0.2, 1.2);
  Eigen::VectorXd w(n);
  for (std::ptrdiff_t i = 0; i < n; ++i) w(i) = uniform(rng);
  return w / w.sum();
}

inline Eigen::VectorXd random_losses(rng_t& rng, std::ptrdiff_t n, double lo = -1.0,
                                     double hi = 3.0) {
  std::uniform_real_distribution<double> uniform(lo, hi);
  Eigen::VectorXd l(n);
  for (std::ptrdiff_t i = 0; i < n; ++i) l(i) = uniform(rng);
  return l;
}

inline bool close(double a, double b, double tol) { return std::abs(a - b) <= tol; }

inline bool close_rel(double a, double b, double tol) {
  return std::abs(a - b) <= tol * (1.0 + std::abs(b));
}

}  // namespace drokit::testing
