#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "doctest.h"
#include "drokit/errors.hpp"
#include "drokit/oracle.hpp"
#include "drokit/robust_risk.hpp"
#include "helpers.hpp"

using namespace drokit;
using drokit::testing::close;
using drokit::testing::close_rel;
using drokit::testing::random_losses;
using drokit::testing::random_weights;
using drokit::testing::uniform_weights;

TEST_CASE("simplex maximizer agrees with the dual solver") {
  Eigen::Vector4d losses(0.0, 1.0, 2.0, 3.0);
  const Eigen::VectorXd p = uniform_weights(4);

  SUBCASE("reference instance") {
    const divergence_spec spec = divergence_spec::cressie_read(2.0, 0.5);
    const double brute = oracle::simplex_maximize(losses, p, spec);
    const double dual = robust_risk_cr(losses, p, 2.0, 0.5).risk;
    CHECK(close_rel(brute, dual, 1e-6));
  }

  SUBCASE("random instances across the family") {
    std::mt19937_64 rng(202);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
      const int n = 2 + static_cast<int>(unif(rng) * 5);
      const Eigen::VectorXd pr = random_weights(rng, n);
      const Eigen::VectorXd l = random_losses(rng, n);
      const double k = 1.2 + 3.0 * unif(rng);
      const double rho = std::pow(10.0, -2.0 + 3.0 * unif(rng));
      const divergence_spec spec = divergence_spec::cressie_read(k, rho);
      const double brute = oracle::simplex_maximize(l, pr, spec, 10, 7000 + trial);
      const double dual = robust_risk_cr(l, pr, k, rho).risk;
      CHECK(close_rel(brute, dual, 1e-6));
    }
  }

  SUBCASE("rho = 0 pins the mean, large rho pins the max") {
    CHECK(close_rel(oracle::simplex_maximize(losses, p, divergence_spec::cressie_read(2.0, 0.0)),
                    p.dot(losses), 1e-7));
    CHECK(close_rel(oracle::simplex_maximize(losses, p, divergence_spec::cressie_read(2.0, 50.0)),
                    losses.maxCoeff(), 1e-6));
  }

  SUBCASE("monotone in rho") {
    double prev = p.dot(losses) - 1e-7;
    for (double rho : {0.01, 0.05, 0.2, 0.8, 3.0}) {
      const double v =
          oracle::simplex_maximize(losses, p, divergence_spec::cressie_read(2.0, rho));
      CHECK(v >= prev - 2e-7);
      prev = v;
    }
  }

  SUBCASE("size guard") {
    const Eigen::VectorXd big = Eigen::VectorXd::LinSpaced(9, 0.0, 1.0);
    CHECK_THROWS_AS(
        oracle::simplex_maximize(big, uniform_weights(9), divergence_spec::cressie_read(2.0, 0.5)),
        size_guard);
  }
}

TEST_CASE("sorted cvar oracle") {
  Eigen::Vector4d losses(1.0, 2.0, 3.0, 4.0);
  const Eigen::VectorXd p = uniform_weights(4);
  CHECK(oracle::cvar_sorted(losses, p, 1.0) == 2.5);
  CHECK(oracle::cvar_sorted(losses, p, 0.5) == 3.5);
  CHECK(oracle::cvar_sorted(losses, p, 0.25) == 4.0);

  SUBCASE("matches the dual routine everywhere") {
    std::mt19937_64 rng(212);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
      const int n = 2 + static_cast<int>(unif(rng) * 10);
      const Eigen::VectorXd pr = random_weights(rng, n);
      const Eigen::VectorXd l = random_losses(rng, n);
      const double alpha = 0.05 + 0.9 * unif(rng);
      CHECK(close_rel(oracle::cvar_sorted(l, pr, alpha), cvar(l, pr, alpha).risk, 1e-9));
    }
  }

  SUBCASE("all-equal losses") {
    const Eigen::VectorXd flat = Eigen::VectorXd::Constant(3, -1.25);
    CHECK(oracle::cvar_sorted(flat, uniform_weights(3), 0.3) == -1.25);
  }

  SUBCASE("cvar as a simplex maximization") {
    std::mt19937_64 rng(213);
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 3 + trial % 4;
      const Eigen::VectorXd pr = random_weights(rng, n);
      const Eigen::VectorXd l = random_losses(rng, n);
      const divergence_spec spec = divergence_spec::cvar(0.35);
      const double brute = oracle::simplex_maximize(l, pr, spec, 10, 8000 + trial);
      CHECK(close_rel(brute, oracle::cvar_sorted(l, pr, 0.35), 1e-6));
    }
  }
}

TEST_CASE("finite difference gradients") {
  SUBCASE("linear functions are exact up to roundoff") {
    Eigen::Vector3d slope(1.5, -2.0, 0.25);
    const auto f = [&](const Eigen::VectorXd& x) { return slope.dot(x) + 7.0; };
    Eigen::Vector3d at(0.3, -1.0, 2.0);
    const Eigen::VectorXd g = oracle::finite_difference_gradient(f, at, 1e-6);
    // No truncation error on a linear function; cancellation leaves
    // eps * |f| / h of rounding noise.
    CHECK((g - slope).lpNorm<Eigen::Infinity>() <= 1e-8);
  }

  SUBCASE("quadratic gradient") {
    const auto f = [](const Eigen::VectorXd& x) { return 0.5 * x.squaredNorm(); };
    Eigen::Vector3d at(1.0, -0.5, 3.0);
    const Eigen::VectorXd g = oracle::finite_difference_gradient(f, at, 1e-6);
    CHECK((g - at).lpNorm<Eigen::Infinity>() <= 1e-8);
  }
}
