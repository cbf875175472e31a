#include "drokit/generators.hpp"

#include <cmath>
#include <random>

#include "drokit/errors.hpp"
#include "drokit/rng.hpp"

namespace drokit {

namespace {

constexpr double kNoiseSd = 0.1;
constexpr double kFlipProb = 0.1;
constexpr double kMinorityProb = 0.1;
constexpr double kThreshold = 1.645;

double sign_of(double t) { return t >= 0.0 ? 1.0 : -1.0; }

void check_n(std::ptrdiff_t n) {
  if (n < 1) throw invalid_spec("generator: n must be >= 1");
}

}  // namespace

classification_rotation_sample gen_classification_rotation(std::uint64_t seed, std::ptrdiff_t n,
                                                           double s) {
  check_n(n);
  if (!(s >= 0.0 && s <= 4.0 * std::atan(1.0) + 1e-12) || !std::isfinite(s))
    throw invalid_spec("gen_classification_rotation: s must lie in [0, pi]");
  constexpr int d = 5;
  rng_t rng(derive_seed(seed, 1));

  classification_rotation_sample out;
  out.s = s;
  out.theta_base = sphere_uniform(rng, d);
  out.direction = orthogonal_unit(rng, out.theta_base);
  // Snap near-zero trig values so s = pi negates theta_base exactly.
  double cs = std::cos(s), sn = std::sin(s);
  if (std::abs(cs) < 2e-16) cs = 0.0;
  if (std::abs(sn) < 2e-16) sn = 0.0;
  out.theta_star = cs * out.theta_base + sn * out.direction;

  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Eigen::MatrixXd x(n, d);
  Eigen::VectorXd y(n);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = normal(rng);
    const double flip = uniform(rng);
    const double raw = sign_of(x.row(i).dot(out.theta_star));
    y(i) = flip < kFlipProb ? -raw : raw;
  }
  out.data = dataset::make(std::move(x), std::move(y));
  return out;
}

regression_threshold_sample gen_regression_threshold(std::uint64_t seed, std::ptrdiff_t n) {
  check_n(n);
  constexpr int d = 5;
  rng_t rng(derive_seed(seed, 2));

  regression_threshold_sample out;
  out.theta_star = sphere_uniform(rng, d);

  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd x(n, d);
  Eigen::VectorXd y(n);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = normal(rng);
    const double eps = kNoiseSd * normal(rng);
    y(i) = x.row(i).dot(out.theta_star) + (x(i, 0) > kThreshold ? x(i, 0) : 0.0) + eps;
  }
  out.data = dataset::make(std::move(x), std::move(y));
  return out;
}

namespace {

group_regression_sample gen_group_regression(std::uint64_t seed, std::ptrdiff_t n,
                                             bool infinite_groups,
                                             std::optional<double> fixed_group) {
  check_n(n);
  if (fixed_group && !(*fixed_group >= 0.0 && *fixed_group <= 1.0))
    throw invalid_spec("gen_infinite_group: fixed group must lie in [0, 1]");
  rng_t rng(derive_seed(seed, infinite_groups ? 4 : 3));

  group_regression_sample out;
  out.theta_group0 << 1.0, 0.1;
  out.theta_group1 << 1.0, 1.0;

  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n), groups(n);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    x(i, 0) = normal(rng);
    x(i, 1) = normal(rng);
    double g;
    if (fixed_group) {
      g = *fixed_group;
    } else if (infinite_groups) {
      g = 1.0 - std::pow(uniform(rng), 1.5);
    } else {
      g = uniform(rng) < kMinorityProb ? 0.0 : 1.0;
    }
    groups(i) = g;
    const Eigen::Vector2d theta = (1.0 - g) * out.theta_group0 + g * out.theta_group1;
    y(i) = x.row(i).dot(theta) + kNoiseSd * normal(rng);
  }
  out.data = dataset::make(std::move(x), std::move(y), std::move(groups));
  return out;
}

}  // namespace

group_regression_sample gen_two_group(std::uint64_t seed, std::ptrdiff_t n) {
  return gen_group_regression(seed, n, false, std::nullopt);
}

group_regression_sample gen_infinite_group(std::uint64_t seed, std::ptrdiff_t n,
                                           std::optional<double> fixed_group) {
  return gen_group_regression(seed, n, true, fixed_group);
}

}  // namespace drokit
