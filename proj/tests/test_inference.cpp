#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "doctest.h"
#include "drokit/errors.hpp"
#include "drokit/inference.hpp"
#include "drokit/solvers.hpp"
#include "drokit/stats.hpp"
#include "helpers.hpp"

using namespace drokit;
using drokit::testing::close;
using drokit::testing::close_rel;

namespace {

dataset gaussian_design(std::mt19937_64& rng, int n, const Eigen::VectorXd& theta_star) {
  std::normal_distribution<double> gauss;
  const int d = static_cast<int>(theta_star.size());
  Eigen::MatrixXd x(n, d);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = gauss(rng);
    y[i] = x.row(i).dot(theta_star) + 0.5 * gauss(rng);
  }
  return dataset::make(x, y);
}

dataset duplicate_rows(const dataset& data) {
  const int n = data.n();
  Eigen::MatrixXd x(2 * n, data.dim());
  Eigen::VectorXd y(2 * n);
  x << data.features, data.features;
  y << data.targets, data.targets;
  return dataset::make(x, y);
}

}  // namespace

TEST_CASE("normal_quantile") {
  CHECK(normal_quantile(0.5) == 0.0);
  CHECK(close(normal_quantile(0.975), 1.959963984540054, 1e-8));
  CHECK(close(normal_quantile(0.025), -1.959963984540054, 1e-8));
  CHECK(close(normal_quantile(0.995), 2.5758293035489004, 1e-8));
  double prev = normal_quantile(0.01);
  for (double p = 0.05; p < 1.0; p += 0.05) {
    const double q = normal_quantile(p);
    CHECK(q > prev);
    prev = q;
  }
}

TEST_CASE("asymptotic covariance") {
  std::mt19937_64 rng(501);
  Eigen::Vector2d theta_star(1.0, -0.5);
  const dataset data = gaussian_design(rng, 200, theta_star);
  const loss_model model = loss_model::make(loss_kind::squared, 2);
  const double k = 2.0, rho = 0.1;
  const joint_dual_fit_result fit = fit_joint_dual(model, data, k, rho, fit_config{});
  REQUIRE(fit.lambda > 0.0);

  SUBCASE("symmetric positive semidefinite") {
    const Eigen::MatrixXd cov =
        asymptotic_covariance(model, data, k, rho, fit.theta, fit.lambda, fit.eta);
    CHECK((cov - cov.transpose()).lpNorm<Eigen::Infinity>() <= 1e-12);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
    CHECK(cov(0, 0) > 0.0);
  }

  SUBCASE("invariant under row duplication") {
    const Eigen::MatrixXd base =
        asymptotic_covariance(model, data, k, rho, fit.theta, fit.lambda, fit.eta);
    const Eigen::MatrixXd doubled = asymptotic_covariance(model, duplicate_rows(data), k, rho,
                                                          fit.theta, fit.lambda, fit.eta);
    CHECK((base - doubled).lpNorm<Eigen::Infinity>() <= 1e-8 * (1.0 + base.norm()));
  }

  SUBCASE("invariant under joint rescaling of the data and duals") {
    // (X, y) -> (aX, ay) leaves theta_hat fixed while losses scale by a^2,
    // so (lambda, eta) -> a^2 (lambda, eta) describes the same fit.
    const double a = 3.0;
    const dataset scaled =
        dataset::make(a * data.features, a * data.targets);
    const Eigen::MatrixXd base =
        asymptotic_covariance(model, data, k, rho, fit.theta, fit.lambda, fit.eta);
    const Eigen::MatrixXd rescaled = asymptotic_covariance(
        model, scaled, k, rho, fit.theta, a * a * fit.lambda, a * a * fit.eta);
    CHECK((base - rescaled).norm() <= 0.05 * base.norm());
  }

  SUBCASE("argument validation") {
    CHECK_THROWS_AS(asymptotic_covariance(loss_model::make(loss_kind::absolute, 2), data, k,
                                          rho, fit.theta, fit.lambda, fit.eta),
                    unsupported_loss);
    CHECK_THROWS_AS(
        asymptotic_covariance(model, data, k, 0.0, fit.theta, fit.lambda, fit.eta),
        invalid_spec);
    CHECK_THROWS_AS(
        asymptotic_covariance(model, data, k, rho, fit.theta, 0.0, fit.eta), invalid_spec);
    CHECK_THROWS_AS(asymptotic_covariance(model, data, k, rho, Eigen::VectorXd::Zero(3),
                                          fit.lambda, fit.eta),
                    dimension_mismatch);
    // Push eta above every loss: the tail empties and curvature degenerates.
    CHECK_THROWS_AS(
        asymptotic_covariance(model, data, k, rho, fit.theta, fit.lambda, 1e9),
        hessian_not_pd);
  }

  SUBCASE("confidence intervals wrap the covariance") {
    const double level = 0.9;
    const inference_report report =
        confidence_intervals(model, data, k, rho, fit.theta, fit.lambda, fit.eta, level);
    REQUIRE(report.intervals.size() == 2);
    CHECK(report.level == level);
    CHECK(report.n == data.n());
    const double z = normal_quantile(0.5 * (1.0 + level));
    for (int j = 0; j < 2; ++j) {
      const auto [lo, hi] = report.intervals[j];
      CHECK(lo <= hi);
      CHECK(close(0.5 * (lo + hi), fit.theta[j], 1e-12));
      const double width = 2.0 * z * std::sqrt(report.covariance(j, j) / data.n());
      CHECK(close_rel(hi - lo, width, 1e-10));
    }

    // Doubling the sample shrinks widths by sqrt(2) at identical covariance.
    const inference_report doubled = confidence_intervals(model, duplicate_rows(data), k, rho,
                                                          fit.theta, fit.lambda, fit.eta, level);
    for (int j = 0; j < 2; ++j) {
      const double w = report.intervals[j].second - report.intervals[j].first;
      const double w2 = doubled.intervals[j].second - doubled.intervals[j].first;
      CHECK(close_rel(w2, w / std::sqrt(2.0), 1e-6));
    }
  }

  SUBCASE("level zero collapses the intervals") {
    const inference_report report =
        confidence_intervals(model, data, k, rho, fit.theta, fit.lambda, fit.eta, 0.0);
    for (int j = 0; j < 2; ++j) {
      CHECK(report.intervals[j].first == fit.theta[j]);
      CHECK(report.intervals[j].second == fit.theta[j]);
    }
    CHECK_THROWS_AS(
        confidence_intervals(model, data, k, rho, fit.theta, fit.lambda, fit.eta, 1.0),
        invalid_spec);
    CHECK_THROWS_AS(
        confidence_intervals(model, data, k, rho, fit.theta, fit.lambda, fit.eta, -0.1),
        invalid_spec);
  }
}
