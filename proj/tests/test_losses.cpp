#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "doctest.h"
#include "drokit/errors.hpp"
#include "drokit/losses.hpp"
#include "helpers.hpp"

using namespace drokit;
using drokit::testing::close;

namespace {

dataset tiny_regression() {
  Eigen::MatrixXd x(3, 2);
  x << 1.0, 0.0, 0.0, 1.0, 1.0, 1.0;
  Eigen::VectorXd y(3);
  y << 1.0, 2.0, 3.0;
  return dataset::make(x, y);
}

dataset random_regression(std::mt19937_64& rng, int n, int d) {
  std::normal_distribution<double> gauss;
  Eigen::MatrixXd x(n, d);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = gauss(rng);
    y[i] = gauss(rng);
  }
  return dataset::make(x, y);
}

dataset random_classification(std::mt19937_64& rng, int n, int d) {
  std::normal_distribution<double> gauss;
  std::bernoulli_distribution coin(0.5);
  Eigen::MatrixXd x(n, d);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < d; ++j) x(i, j) = gauss(rng);
    y[i] = coin(rng) ? 1.0 : -1.0;
  }
  return dataset::make(x, y);
}

}  // namespace

TEST_CASE("loss values at reference points") {
  SUBCASE("hinge at theta = 0 is one per row") {
    std::mt19937_64 rng(11);
    const dataset data = random_classification(rng, 12, 3);
    const loss_model model = loss_model::make(loss_kind::hinge, 3);
    const Eigen::VectorXd values = loss_values(model, Eigen::VectorXd::Zero(3), data);
    for (int i = 0; i < data.n(); ++i) CHECK(values[i] == 1.0);
  }

  SUBCASE("squared loss of a perfect fit is zero") {
    Eigen::MatrixXd x(4, 2);
    x << 1.0, 0.0, 0.0, 1.0, 2.0, 1.0, -1.0, 3.0;
    Eigen::VectorXd theta(2);
    theta << 0.5, -2.0;
    const dataset data = dataset::make(x, x * theta);
    const loss_model model = loss_model::make(loss_kind::squared, 2);
    const Eigen::VectorXd values = loss_values(model, theta, data);
    for (int i = 0; i < data.n(); ++i) CHECK(values[i] == 0.0);
  }

  SUBCASE("squared loss carries the half factor") {
    Eigen::MatrixXd x(1, 1);
    x << 1.0;
    Eigen::VectorXd y(1);
    y << 0.0;
    const dataset data = dataset::make(x, y);
    const loss_model model = loss_model::make(loss_kind::squared, 1);
    Eigen::VectorXd theta(1);
    theta << 3.0;
    CHECK(loss_values(model, theta, data)[0] == 4.5);
  }

  SUBCASE("absolute loss on a single row") {
    Eigen::MatrixXd x(1, 2);
    x << 2.0, 5.0;
    Eigen::VectorXd y(1);
    y << 0.5;
    const dataset data = dataset::make(x, y);
    const loss_model model = loss_model::make(loss_kind::absolute, 2);
    Eigen::VectorXd theta(2);
    theta << 1.0, 0.0;
    CHECK(loss_values(model, theta, data)[0] == 1.5);
  }

  SUBCASE("logistic at theta = 0 is log 2 with gradient -y x / 2") {
    std::mt19937_64 rng(12);
    const dataset data = random_classification(rng, 8, 2);
    const loss_model model = loss_model::make(loss_kind::binary_logistic, 2);
    const Eigen::VectorXd theta = Eigen::VectorXd::Zero(2);
    const Eigen::VectorXd values = loss_values(model, theta, data);
    const Eigen::MatrixXd grads = loss_subgradients(model, theta, data);
    for (int i = 0; i < data.n(); ++i) {
      CHECK(close(values[i], std::log(2.0), 1e-15));
      const Eigen::VectorXd expect = -0.5 * data.targets[i] * data.features.row(i).transpose();
      CHECK((grads.row(i).transpose() - expect).norm() <= 1e-15);
    }
  }

  SUBCASE("linear loss is the margin and its gradient is the feature") {
    Eigen::MatrixXd x(3, 1);
    x << 0.5, -2.0, 4.0;
    Eigen::VectorXd y(3);
    y << 9.0, 9.0, 9.0;  // ignored by the linear loss
    const dataset data = dataset::make(x, y);
    const loss_model model = loss_model::make(loss_kind::linear, 1);
    Eigen::VectorXd theta(1);
    theta << -3.0;
    const Eigen::VectorXd values = loss_values(model, theta, data);
    const Eigen::MatrixXd grads = loss_subgradients(model, theta, data);
    for (int i = 0; i < 3; ++i) {
      CHECK(values[i] == -3.0 * x(i, 0));
      CHECK(grads(i, 0) == x(i, 0));
    }
  }
}

TEST_CASE("subgradient conventions at kinks") {
  SUBCASE("hinge rows at or past the margin are zero") {
    Eigen::MatrixXd x(2, 1);
    x << 1.0, 2.0;
    Eigen::VectorXd y(2);
    y << 1.0, 1.0;
    const dataset data = dataset::make(x, y);
    const loss_model model = loss_model::make(loss_kind::hinge, 1);
    Eigen::VectorXd theta(1);
    theta << 1.0;  // margins exactly 1 and 2
    const Eigen::MatrixXd grads = loss_subgradients(model, theta, data);
    CHECK(grads(0, 0) == 0.0);
    CHECK(grads(1, 0) == 0.0);
  }

  SUBCASE("absolute loss at zero residual is zero") {
    Eigen::MatrixXd x(1, 2);
    x << 1.0, 1.0;
    Eigen::VectorXd y(1);
    y << 3.0;
    const dataset data = dataset::make(x, y);
    const loss_model model = loss_model::make(loss_kind::absolute, 2);
    Eigen::VectorXd theta(2);
    theta << 1.0, 2.0;
    CHECK(loss_subgradients(model, theta, data).row(0).norm() == 0.0);
  }
}

TEST_CASE("subgradients support the loss from below") {
  // ell(theta') >= ell(theta) + g . (theta' - theta) for every convex loss.
  std::mt19937_64 rng(21);
  std::normal_distribution<double> gauss;
  const int d = 3;
  for (loss_kind kind : {loss_kind::squared, loss_kind::absolute, loss_kind::hinge,
                         loss_kind::binary_logistic}) {
    const bool classify = kind == loss_kind::hinge || kind == loss_kind::binary_logistic;
    const dataset data = classify ? random_classification(rng, 15, d)
                                  : random_regression(rng, 15, d);
    const loss_model model = loss_model::make(kind, d);
    for (int trial = 0; trial < 40; ++trial) {
      Eigen::VectorXd theta(d), other(d);
      for (int j = 0; j < d; ++j) {
        theta[j] = gauss(rng);
        other[j] = gauss(rng);
      }
      const Eigen::VectorXd at = loss_values(model, theta, data);
      const Eigen::VectorXd to = loss_values(model, other, data);
      const Eigen::MatrixXd grads = loss_subgradients(model, theta, data);
      for (int i = 0; i < data.n(); ++i) {
        const double linear = at[i] + grads.row(i).dot((other - theta).transpose());
        CHECK(to[i] >= linear - 1e-9);
      }
    }
  }
}

TEST_CASE("projection onto norm balls") {
  SUBCASE("feasible points are unchanged") {
    const constraint_set ball = constraint_set::norm_ball(0.0, 1.0, 2.0);
    Eigen::VectorXd theta(2);
    theta << 0.3, -0.4;
    CHECK(project(theta, ball) == theta);
    CHECK(project(theta, constraint_set{}) == theta);
  }

  SUBCASE("L2 projection is radial") {
    const constraint_set ball = constraint_set::norm_ball(0.0, 1.0, 1.0);
    Eigen::VectorXd theta(2);
    theta << 3.0, 4.0;
    const Eigen::VectorXd proj = project(theta, ball);
    CHECK(close(proj[0], 0.6, 1e-12));
    CHECK(close(proj[1], 0.8, 1e-12));
  }

  SUBCASE("L1 projection soft-thresholds") {
    const constraint_set ball = constraint_set::norm_ball(1.0, 0.0, 1.0);
    Eigen::VectorXd theta(2);
    theta << 1.0, 1.0;
    const Eigen::VectorXd proj = project(theta, ball);
    CHECK(close(proj[0], 0.5, 1e-9));
    CHECK(close(proj[1], 0.5, 1e-9));
  }

  SUBCASE("projection is idempotent and non-expansive") {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> gauss;
    const std::vector<constraint_set> balls = {
        constraint_set::norm_ball(0.0, 1.0, 1.5),
        constraint_set::norm_ball(1.0, 0.0, 1.5),
        constraint_set::norm_ball(0.7, 0.3, 1.2),
    };
    for (const auto& ball : balls) {
      for (int trial = 0; trial < 50; ++trial) {
        Eigen::VectorXd u(3), v(3);
        for (int j = 0; j < 3; ++j) {
          u[j] = 3.0 * gauss(rng);
          v[j] = 3.0 * gauss(rng);
        }
        const Eigen::VectorXd pu = project(u, ball);
        const Eigen::VectorXd pv = project(v, ball);
        const double value = ball.a1 * pu.lpNorm<1>() + ball.a2 * pu.norm();
        CHECK(value <= ball.r + 1e-8);
        CHECK((project(pu, ball) - pu).norm() <= 1e-10);
        CHECK((pu - pv).norm() <= (u - v).norm() + 1e-8);
      }
    }
  }

  SUBCASE("elastic-net projection matches a boundary search") {
    // The projection of an exterior point sits on the boundary
    // t(phi) (cos phi, sin phi) with t(phi) = r / (a1 (|cos| + |sin|) + a2).
    const double a1 = 0.6, a2 = 0.4, r = 1.0;
    const constraint_set ball = constraint_set::norm_ball(a1, a2, r);
    std::mt19937_64 rng(32);
    std::normal_distribution<double> gauss;
    for (int trial = 0; trial < 10; ++trial) {
      Eigen::VectorXd theta(2);
      theta << 2.0 + gauss(rng), 2.0 * gauss(rng);
      if (a1 * theta.lpNorm<1>() + a2 * theta.norm() <= r) continue;
      const Eigen::VectorXd proj = project(theta, ball);
      double best = std::numeric_limits<double>::infinity();
      const int grid = 200000;
      for (int g = 0; g < grid; ++g) {
        const double phi = 2.0 * M_PI * g / grid;
        const double c = std::cos(phi), s = std::sin(phi);
        const double t = r / (a1 * (std::abs(c) + std::abs(s)) + a2);
        const double dx = theta[0] - t * c, dy = theta[1] - t * s;
        best = std::min(best, std::hypot(dx, dy));
      }
      const double dist = (theta - proj).norm();
      CHECK(dist <= best + 1e-6);
      CHECK(dist >= best - 1e-4);
      CHECK(a1 * proj.lpNorm<1>() + a2 * proj.norm() <= r + 1e-8);
    }
  }
}

TEST_CASE("dataset construction and subsetting") {
  SUBCASE("default base weights are uniform") {
    const dataset data = tiny_regression();
    for (int i = 0; i < 3; ++i) CHECK(close(data.base_weights[i], 1.0 / 3.0, 1e-15));
  }

  SUBCASE("subset renormalizes base weights") {
    Eigen::MatrixXd x(4, 1);
    x << 1.0, 2.0, 3.0, 4.0;
    Eigen::VectorXd y(4);
    y << 0.0, 0.0, 0.0, 0.0;
    Eigen::VectorXd w(4);
    w << 0.1, 0.2, 0.3, 0.4;
    const dataset data = dataset::make(x, y, std::nullopt, w);
    const dataset sub = data.subset({1, 3});
    CHECK(sub.n() == 2);
    CHECK(sub.features(0, 0) == 2.0);
    CHECK(sub.features(1, 0) == 4.0);
    CHECK(close(sub.base_weights[0], 0.2 / 0.6, 1e-15));
    CHECK(close(sub.base_weights[1], 0.4 / 0.6, 1e-15));
  }

  SUBCASE("groups ride along through subset") {
    Eigen::MatrixXd x(3, 1);
    x << 1.0, 2.0, 3.0;
    Eigen::VectorXd y = Eigen::VectorXd::Zero(3);
    Eigen::VectorXd g(3);
    g << 0.0, 1.0, 1.0;
    const dataset data = dataset::make(x, y, g);
    const dataset sub = data.subset({2, 0});
    REQUIRE(sub.groups.has_value());
    CHECK((*sub.groups)[0] == 1.0);
    CHECK((*sub.groups)[1] == 0.0);
  }

  SUBCASE("validation errors") {
    Eigen::MatrixXd x(2, 1);
    x << 1.0, 2.0;
    Eigen::VectorXd y2 = Eigen::VectorXd::Zero(2);
    CHECK_THROWS_AS(dataset::make(Eigen::MatrixXd(0, 1), Eigen::VectorXd(0)), empty_input);
    CHECK_THROWS_AS(dataset::make(Eigen::MatrixXd(2, 0), y2), empty_input);
    CHECK_THROWS_AS(dataset::make(x, Eigen::VectorXd::Zero(3)), length_mismatch);
    CHECK_THROWS_AS(dataset::make(x, y2, Eigen::VectorXd::Zero(3)), length_mismatch);
    CHECK_THROWS_AS(dataset::make(x, y2, std::nullopt, Eigen::VectorXd::Zero(3)),
                    length_mismatch);
    Eigen::VectorXd wneg(2);
    wneg << -0.5, 1.5;
    CHECK_THROWS_AS(dataset::make(x, y2, std::nullopt, wneg), not_a_probability);
    Eigen::VectorXd wsum(2);
    wsum << 0.5, 0.6;
    CHECK_THROWS_AS(dataset::make(x, y2, std::nullopt, wsum), not_a_probability);
    const dataset data = dataset::make(x, y2);
    CHECK_THROWS_AS(data.subset({}), empty_input);
    CHECK_THROWS_AS(data.subset({0, 2}), index_out_of_range);
  }
}

TEST_CASE("model and constraint validation") {
  CHECK_THROWS_AS(loss_model::make(loss_kind::squared, 0), invalid_spec);
  CHECK_THROWS_AS(loss_model::make(loss_kind::linear, 2), invalid_spec);
  CHECK_THROWS_AS(constraint_set::norm_ball(-1.0, 1.0, 1.0), invalid_spec);
  CHECK_THROWS_AS(constraint_set::norm_ball(0.0, 0.0, 1.0), invalid_spec);
  CHECK_THROWS_AS(constraint_set::norm_ball(1.0, 0.0, 0.0), invalid_spec);

  const dataset data = tiny_regression();
  const loss_model model = loss_model::make(loss_kind::squared, 2);
  CHECK_THROWS_AS(loss_values(model, Eigen::VectorXd::Zero(3), data), dimension_mismatch);
  CHECK_THROWS_AS(loss_values(loss_model::make(loss_kind::squared, 3),
                              Eigen::VectorXd::Zero(3), data),
                  dimension_mismatch);

  Eigen::MatrixXd x(1, 1);
  x << 1.0;
  Eigen::VectorXd ybad(1);
  ybad << 0.5;
  const dataset bad = dataset::make(x, ybad);
  CHECK_THROWS_AS(loss_values(loss_model::make(loss_kind::hinge, 1),
                              Eigen::VectorXd::Zero(1), bad),
                  schema_mismatch);
  CHECK_THROWS_AS(loss_subgradients(loss_model::make(loss_kind::binary_logistic, 1),
                                    Eigen::VectorXd::Zero(1), bad),
                  schema_mismatch);
}
