#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>

#include "drokit/losses.hpp"

namespace drokit {

// Synthetic designs used by the simulation harness. Every generator is a
// pure function of (seed, parameters) with a fixed draw order, so datasets
// are bit-identical across runs and across platforms with the same libm.

struct classification_rotation_sample {
  dataset data;
  Eigen::VectorXd theta_base;  // unit vector drawn first
  Eigen::VectorXd direction;   // unit vector orthogonal to theta_base
  Eigen::VectorXd theta_star;  // theta_base cos(s) + direction sin(s)
  double s = 0.0;
};

// d=5 Gaussian features, labels sign(x' theta_star) flipped with
// probability 0.1. Per row the draw order is: 5 feature normals, then one
// flip uniform; s only rotates the decision boundary, so two calls with the
// same seed and different s share features and flip coins.
classification_rotation_sample gen_classification_rotation(std::uint64_t seed, std::ptrdiff_t n,
                                                           double s);

struct regression_threshold_sample {
  dataset data;
  Eigen::VectorXd theta_star;
};

// d=5 Gaussian features, y = x' theta_star + eps with sd-0.1 noise, plus an
// extra x1 contribution on the rare rows where x1 > 1.645 (about 5%).
regression_threshold_sample gen_regression_threshold(std::uint64_t seed, std::ptrdiff_t n);

struct group_regression_sample {
  dataset data;  // groups column filled with the latent g per row
  Eigen::Vector2d theta_group0;
  Eigen::Vector2d theta_group1;
};

// d=2 Gaussian features, y = x' theta(g) + eps, theta(g) interpolating
// theta_group0 = (1, 0.1) and theta_group1 = (1, 1), sd-0.1 noise.
// Two-group: g = 0 with probability 0.1 (minority), else 1.
group_regression_sample gen_two_group(std::uint64_t seed, std::ptrdiff_t n);

// Continuous groups with density proportional to (1-g)^(-1/3) on [0, 1),
// sampled by the inverse CDF g = 1 - u^(3/2). Passing fixed_group pins
// g to that value for every row (auxiliary samples); the group uniform is
// then not drawn, all other draws keep their order.
group_regression_sample gen_infinite_group(std::uint64_t seed, std::ptrdiff_t n,
                                           std::optional<double> fixed_group = std::nullopt);

}  // namespace drokit
