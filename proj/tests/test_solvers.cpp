#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "doctest.h"
#include "drokit/errors.hpp"
#include "drokit/robust_risk.hpp"
#include "drokit/solvers.hpp"
#include "helpers.hpp"

using namespace drokit;
using drokit::testing::close;
using drokit::testing::close_rel;

namespace {

dataset linear_data(std::mt19937_64& rng, int n, const Eigen::VectorXd& theta_star,
                    double noise_sd) {
  std::normal_distribution<double> gauss;
  const int d = static_cast<int>(theta_star.size());
  Eigen::MatrixXd x(n, d);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = gauss(rng);
    y[i] = x.row(i).dot(theta_star) + noise_sd * gauss(rng);
  }
  return dataset::make(x, y);
}

// Two labeled blocks with exact second moment I: per group, m copies of
// sqrt(2) e1 and m copies of sqrt(2) e2, noiseless targets from theta_g.
dataset identity_two_group(int m, const Eigen::Vector2d& theta0, const Eigen::Vector2d& theta1) {
  const int n = 4 * m;
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n), g(n);
  int row = 0;
  for (int label = 0; label < 2; ++label) {
    const Eigen::Vector2d theta = label == 0 ? theta0 : theta1;
    for (int j = 0; j < 2; ++j) {
      for (int c = 0; c < m; ++c) {
        x.row(row).setZero();
        x(row, j) = std::sqrt(2.0);
        y[row] = x.row(row).dot(theta);
        g[row] = label;
        ++row;
      }
    }
  }
  return dataset::make(x, y, g);
}

}  // namespace

TEST_CASE("fit_erm") {
  SUBCASE("interpolates noiseless linear data") {
    std::mt19937_64 rng(301);
    Eigen::Vector3d theta_star(1.0, -2.0, 0.5);
    const dataset data = linear_data(rng, 40, theta_star, 0.0);
    const loss_model model = loss_model::make(loss_kind::squared, 3);
    const fit_result fit = fit_erm(model, data, constraint_set{}, fit_config{});
    CHECK(fit.objective <= 1e-8);
    CHECK((fit.theta - theta_star).norm() <= 1e-3);
  }

  SUBCASE("one-dimensional least squares lands on the mean") {
    Eigen::MatrixXd x(2, 1);
    x << 1.0, 1.0;
    Eigen::VectorXd y(2);
    y << 1.0, 3.0;
    const dataset data = dataset::make(x, y);
    const loss_model model = loss_model::make(loss_kind::squared, 1);
    const fit_result fit = fit_erm(model, data, constraint_set{}, fit_config{});
    CHECK(close(fit.theta[0], 2.0, 1e-6));
    CHECK(close(fit.objective, 0.5, 1e-8));
    CHECK(fit.converged);
  }

  SUBCASE("separable hinge problem reaches zero loss") {
    Eigen::MatrixXd x(4, 2);
    x << 2.0, 0.5, 1.5, 1.0, -2.0, -0.5, -1.0, -1.5;
    Eigen::VectorXd y(4);
    y << 1.0, 1.0, -1.0, -1.0;
    const dataset data = dataset::make(x, y);
    const loss_model model = loss_model::make(loss_kind::hinge, 2);
    fit_config config;
    config.max_iter = 20000;
    const fit_result fit =
        fit_erm(model, data, constraint_set::norm_ball(0.0, 1.0, 10.0), config);
    CHECK(fit.objective <= 1e-6);
  }

  SUBCASE("trace is nonincreasing and starts at iteration zero") {
    std::mt19937_64 rng(302);
    const dataset data = linear_data(rng, 25, Eigen::Vector2d(0.5, -1.0), 0.2);
    const loss_model model = loss_model::make(loss_kind::absolute, 2);
    const fit_result fit = fit_erm(model, data, constraint_set{}, fit_config{});
    REQUIRE(!fit.trace.empty());
    CHECK(fit.trace.front().first == 0);
    for (std::size_t i = 1; i < fit.trace.size(); ++i) {
      CHECK(fit.trace[i].second <= fit.trace[i - 1].second + 1e-15);
      CHECK(fit.trace[i].first > fit.trace[i - 1].first);
    }
    CHECK(close_rel(fit.trace.back().second, fit.objective, 1e-12));
  }
}

TEST_CASE("fit_dro") {
  std::mt19937_64 rng(311);
  const dataset data = linear_data(rng, 30, Eigen::Vector2d(1.0, 0.3), 0.4);
  const loss_model model = loss_model::make(loss_kind::squared, 2);

  SUBCASE("rho = 0 reproduces fit_erm") {
    const fit_result erm = fit_erm(model, data, constraint_set{}, fit_config{});
    const fit_result dro =
        fit_dro(model, data, divergence_spec::cressie_read(2.0, 0.0), constraint_set{},
                fit_config{});
    CHECK((erm.theta - dro.theta).lpNorm<Eigen::Infinity>() <= 1e-8);
    CHECK(close(erm.objective, dro.objective, 1e-12));
  }

  SUBCASE("constrained fits stay feasible") {
    const constraint_set ball = constraint_set::norm_ball(0.5, 0.5, 0.8);
    const fit_result fit =
        fit_dro(model, data, divergence_spec::cressie_read(2.0, 0.5), ball, fit_config{});
    CHECK(0.5 * fit.theta.lpNorm<1>() + 0.5 * fit.theta.norm() <= 0.8 + 1e-8);
  }

  SUBCASE("repeat runs are bit-identical") {
    const divergence_spec spec = divergence_spec::cressie_read(1.5, 0.3);
    const fit_result a = fit_dro(model, data, spec, constraint_set{}, fit_config{});
    const fit_result b = fit_dro(model, data, spec, constraint_set{}, fit_config{});
    CHECK(a.theta == b.theta);
    CHECK(a.objective == b.objective);
    CHECK(a.iterations == b.iterations);
  }

  SUBCASE("cvar specs are accepted") {
    const fit_result fit =
        fit_dro(model, data, divergence_spec::cvar(0.3), constraint_set{}, fit_config{});
    const worst_case wc =
        robust_risk(loss_values(model, fit.theta, data), data.base_weights,
                    divergence_spec::cvar(0.3));
    CHECK(close_rel(fit.objective, wc.risk, 1e-10));
  }

  SUBCASE("minimizes the robust objective below the ERM point") {
    // 36 background rows pull the mean fit toward 0; 4 outlier rows at the
    // same feature value want theta = 3. The robust objective prefers a
    // compromise strictly better than either pull alone.
    Eigen::MatrixXd x(40, 1);
    Eigen::VectorXd y(40);
    for (int i = 0; i < 40; ++i) {
      x(i, 0) = 1.0;
      y[i] = i < 36 ? 0.0 : 3.0;
    }
    const dataset skew = dataset::make(x, y);
    const loss_model m1 = loss_model::make(loss_kind::squared, 1);
    const divergence_spec spec = divergence_spec::cressie_read(2.0, 1.0);
    const fit_result erm = fit_erm(m1, skew, constraint_set{}, fit_config{});
    const fit_result dro = fit_dro(m1, skew, spec, constraint_set{}, fit_config{});
    const auto robust_at = [&](const Eigen::VectorXd& theta) {
      return robust_risk(loss_values(m1, theta, skew), skew.base_weights, spec).risk;
    };
    CHECK(robust_at(dro.theta) <= robust_at(erm.theta));
    CHECK(robust_at(erm.theta) - robust_at(dro.theta) > 1e-4);
    CHECK(dro.theta[0] > erm.theta[0] + 1e-3);  // robust fit leans toward the tail
  }

  SUBCASE("estimates sharpen as data grows") {
    Eigen::Vector2d theta_star(0.8, -0.5);
    fit_config config;
    config.max_iter = 150;
    config.grad_tol = 1e-6;
    const divergence_spec spec = divergence_spec::cressie_read(2.0, 0.1);
    const loss_model m2 = loss_model::make(loss_kind::squared, 2);
    std::vector<double> medians;
    for (int n : {100, 1000, 10000}) {
      std::vector<double> errs;
      for (int rep = 0; rep < 15; ++rep) {
        std::mt19937_64 gen(900 + rep);
        const dataset d = linear_data(gen, n, theta_star, 0.3);
        const fit_result fit = fit_dro(m2, d, spec, constraint_set{}, config);
        errs.push_back((fit.theta - theta_star).norm());
      }
      std::nth_element(errs.begin(), errs.begin() + errs.size() / 2, errs.end());
      medians.push_back(errs[errs.size() / 2]);
    }
    CHECK(medians[1] < medians[0]);
    CHECK(medians[2] < medians[1]);
  }
}

TEST_CASE("fit_joint_dual") {
  std::mt19937_64 rng(321);
  const dataset data = linear_data(rng, 50, Eigen::Vector3d(1.0, -0.5, 0.2), 0.5);
  const loss_model model = loss_model::make(loss_kind::squared, 3);
  const double k = 2.0, rho = 0.5;

  SUBCASE("matches the plug-in solver") {
    const joint_dual_fit_result joint = fit_joint_dual(model, data, k, rho, fit_config{});
    const fit_result plug =
        fit_dro(model, data, divergence_spec::cressie_read(k, rho), constraint_set{},
                fit_config{});
    CHECK(close_rel(joint.objective, plug.objective, 1e-6));
    CHECK(joint.lambda > 0.0);

    // The reported (lambda, eta) agree with the inner problem solved exactly
    // at the fitted theta; eta transfers through eta_generic - lambda/(k-1).
    const worst_case inner =
        robust_risk_cr(loss_values(model, joint.theta, data), data.base_weights, k, rho);
    CHECK(close(joint.eta - joint.lambda / (k - 1.0), inner.eta_star, 1e-6));
    CHECK(close_rel(joint.lambda, inner.lambda_star, 1e-6));
    CHECK(close_rel(joint.objective, inner.risk, 1e-6));
  }

  SUBCASE("deterministic") {
    const joint_dual_fit_result a = fit_joint_dual(model, data, k, rho, fit_config{});
    const joint_dual_fit_result b = fit_joint_dual(model, data, k, rho, fit_config{});
    CHECK(a.theta == b.theta);
    CHECK(a.lambda == b.lambda);
    CHECK(a.eta == b.eta);
  }

  SUBCASE("rejects nonsmooth losses and zero budgets") {
    Eigen::MatrixXd x(4, 1);
    x << 1.0, 2.0, -1.0, -2.0;
    Eigen::VectorXd y(4);
    y << 1.0, 1.0, -1.0, -1.0;
    const dataset cls = dataset::make(x, y);
    CHECK_THROWS_AS(
        fit_joint_dual(loss_model::make(loss_kind::hinge, 1), cls, 2.0, 0.5, fit_config{}),
        unsupported_loss);
    CHECK_THROWS_AS(fit_joint_dual(model, data, 2.0, 0.0, fit_config{}), invalid_spec);
  }
}

TEST_CASE("chebyshev_center") {
  SUBCASE("single point") {
    Eigen::MatrixXd pts(1, 2);
    pts << 0.7, -0.3;
    const Eigen::VectorXd c = chebyshev_center(pts);
    CHECK(close(c[0], 0.7, 1e-6));
    CHECK(close(c[1], -0.3, 1e-6));
  }

  SUBCASE("two points give the midpoint") {
    Eigen::MatrixXd pts(2, 2);
    pts << 1.0, 0.0, 0.0, 2.0;
    const Eigen::VectorXd c = chebyshev_center(pts);
    CHECK(close(c[0], 0.5, 1e-4));
    CHECK(close(c[1], 1.0, 1e-4));
  }

  SUBCASE("three points on the unit circle") {
    Eigen::MatrixXd pts(3, 2);
    pts << 1.0, 0.0, 0.0, 1.0, -1.0, 0.0;
    const Eigen::VectorXd c = chebyshev_center(pts);
    CHECK(std::abs(c[0]) <= 1e-4);
    CHECK(std::abs(c[1]) <= 1e-4);
  }

  SUBCASE("empty input") {
    CHECK_THROWS_AS(chebyshev_center(Eigen::MatrixXd(0, 2)), empty_input);
  }
}

TEST_CASE("maximin_oracle") {
  SUBCASE("identical groups reduce to the pooled fit") {
    std::mt19937_64 rng(331);
    Eigen::Vector2d theta_star(0.6, -1.2);
    std::normal_distribution<double> gauss;
    const int n = 60;
    Eigen::MatrixXd x(n, 2);
    Eigen::VectorXd y(n), g(n);
    for (int i = 0; i < n; ++i) {
      x(i, 0) = gauss(rng);
      x(i, 1) = gauss(rng);
      y[i] = x.row(i).dot(theta_star);
      g[i] = i % 2;
    }
    const dataset data = dataset::make(x, y, g);
    const Eigen::VectorXd opt = maximin_oracle(data);
    CHECK((opt - theta_star).norm() <= 1e-4);
  }

  SUBCASE("equal injected parameters are returned") {
    const dataset data = identity_two_group(5, {1.0, 0.1}, {1.0, 1.0});
    Eigen::VectorXd shared(2);
    shared << 0.4, -0.7;
    maximin_options options;
    options.injected_group_params = {{{0.0, shared}, {1.0, shared}}};
    const Eigen::VectorXd opt = maximin_oracle(data, options);
    CHECK((opt - shared).norm() <= 1e-4);
  }

  SUBCASE("two-group identity design against a grid search") {
    const Eigen::Vector2d theta0(1.0, 0.1), theta1(1.0, 1.0);
    const dataset data = identity_two_group(5, theta0, theta1);
    const Eigen::VectorXd opt = maximin_oracle(data);

    // With unit second moments the group objective is
    // |theta_g|^2 - |theta - theta_g|^2.
    const auto value = [&](const Eigen::Vector2d& t) {
      const double v0 = theta0.squaredNorm() - (t - theta0).squaredNorm();
      const double v1 = theta1.squaredNorm() - (t - theta1).squaredNorm();
      return std::min(v0, v1);
    };
    double best = -1e300;
    Eigen::Vector2d arg = Eigen::Vector2d::Zero();
    for (double a = -0.5; a <= 1.51; a += 0.002) {
      for (double b = -0.5; b <= 1.51; b += 0.002) {
        const double v = value({a, b});
        if (v > best) {
          best = v;
          arg = {a, b};
        }
      }
    }
    CHECK(close(value({opt[0], opt[1]}), best, 1e-3));
    CHECK((opt - Eigen::VectorXd(arg)).norm() <= 1e-2);
  }

  SUBCASE("error paths") {
    std::mt19937_64 rng(332);
    const dataset ungrouped = linear_data(rng, 10, Eigen::Vector2d(1.0, 1.0), 0.1);
    CHECK_THROWS_AS(maximin_oracle(ungrouped), schema_mismatch);

    Eigen::MatrixXd x(4, 2);
    x << 1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, -1.0;
    Eigen::VectorXd y = Eigen::VectorXd::Zero(4);
    const dataset one_label = dataset::make(x, y, Eigen::VectorXd::Zero(4));
    CHECK_THROWS_AS(maximin_oracle(one_label), schema_mismatch);

    Eigen::VectorXd g(4);
    g << 0.0, 1.0, 1.0, 1.0;  // group 0 has a single row but dim = 2
    const dataset thin = dataset::make(x, y, g);
    CHECK_THROWS_AS(maximin_oracle(thin), too_few_rows);

    Eigen::MatrixXd xs(4, 2);
    xs << 1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0;  // group 0 spans only e1
    Eigen::VectorXd gs(4);
    gs << 0.0, 0.0, 1.0, 1.0;
    const dataset degenerate = dataset::make(xs, y, gs);
    CHECK_THROWS_AS(maximin_oracle(degenerate), singular_group_covariance);

    const dataset ok = identity_two_group(3, {1.0, 0.0}, {0.0, 1.0});
    maximin_options bad_dim;
    bad_dim.injected_group_params = {{{0.0, Eigen::VectorXd::Zero(3)},
                                      {1.0, Eigen::VectorXd::Zero(3)}}};
    CHECK_THROWS_AS(maximin_oracle(ok, bad_dim), dimension_mismatch);

    maximin_options missing;
    missing.injected_group_params = {{{0.0, Eigen::VectorXd::Zero(2)}}};
    CHECK_THROWS_AS(maximin_oracle(ok, missing), schema_mismatch);

    maximin_options zero_restarts;
    zero_restarts.restarts = 0;
    CHECK_THROWS_AS(maximin_oracle(ok, zero_restarts), invalid_spec);
  }
}

TEST_CASE("fit configuration validation") {
  std::mt19937_64 rng(341);
  const dataset data = linear_data(rng, 10, Eigen::Vector2d(1.0, 1.0), 0.1);
  const loss_model model = loss_model::make(loss_kind::squared, 2);
  fit_config config;
  config.max_iter = 0;
  CHECK_THROWS_AS(fit_erm(model, data, constraint_set{}, config), invalid_spec);
  config = fit_config{};
  config.grad_tol = 0.0;
  CHECK_THROWS_AS(fit_erm(model, data, constraint_set{}, config), invalid_spec);
  config = fit_config{};
  config.init_step = -1.0;
  CHECK_THROWS_AS(fit_erm(model, data, constraint_set{}, config), invalid_spec);
  config = fit_config{};
  config.armijo_c = 1.0;
  CHECK_THROWS_AS(fit_erm(model, data, constraint_set{}, config), invalid_spec);
  config = fit_config{};
  config.backtrack = 0.0;
  CHECK_THROWS_AS(fit_erm(model, data, constraint_set{}, config), invalid_spec);
}
