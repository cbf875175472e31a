#include <atomic>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "doctest.h"
#include "drokit/parallel.hpp"
#include "drokit/rng.hpp"
#include "drokit/stats.hpp"
#include "helpers.hpp"

using namespace drokit;
using drokit::testing::close;

TEST_CASE("derive_seed") {
  CHECK(derive_seed(1, 2) == derive_seed(1, 2));
  CHECK(derive_seed(1, 2) != derive_seed(1, 3));
  CHECK(derive_seed(1, 2) != derive_seed(2, 2));

  // Streams of one base seed should not collide over a realistic range.
  std::vector<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 1000; ++s) seen.push_back(derive_seed(20240915, s));
  std::sort(seen.begin(), seen.end());
  CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
}

TEST_CASE("sphere_uniform and orthogonal_unit") {
  rng_t rng(99);
  for (int trial = 0; trial < 25; ++trial) {
    const Eigen::VectorXd u = sphere_uniform(rng, 5);
    CHECK(close(u.norm(), 1.0, 1e-12));
    const Eigen::VectorXd v = orthogonal_unit(rng, u);
    CHECK(close(v.norm(), 1.0, 1e-12));
    CHECK(std::abs(u.dot(v)) <= 1e-12);
  }
}

TEST_CASE("empirical_quantile uses type-7 interpolation") {
  const std::vector<double> values = {4.0, 1.0, 3.0, 2.0};  // order must not matter
  CHECK(empirical_quantile(values, 0.0) == 1.0);
  CHECK(empirical_quantile(values, 1.0) == 4.0);
  CHECK(close(empirical_quantile(values, 0.5), 2.5, 1e-15));
  // h = q (n - 1): q = 0.9 -> h = 2.7 between the 3rd and 4th order stats
  CHECK(close(empirical_quantile(values, 0.9), 3.7, 1e-12));
  CHECK(empirical_quantile({5.0}, 0.3) == 5.0);

  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(close(median({4.0, 1.0, 3.0, 2.0}), 2.5, 1e-15));
}

TEST_CASE("fitted_slope") {
  const std::vector<double> x = {0.0, 1.0, 2.0, 3.0};
  const std::vector<double> y = {1.0, 3.0, 5.0, 7.0};
  CHECK(close(fitted_slope(x, y), 2.0, 1e-12));

  // adding symmetric residuals leaves the least-squares slope unchanged
  const std::vector<double> noisy = {1.5, 2.5, 5.5, 6.5};
  CHECK(close(fitted_slope(x, noisy), 1.8, 1e-12));
}

TEST_CASE("parallel_for covers every slot exactly once") {
  const int n = 1000;
  std::vector<int> hits(n, 0);
  parallel_for(n, [&](int i) { hits[i] += 1; });
  for (int i = 0; i < n; ++i) CHECK(hits[i] == 1);

  std::atomic<int> total{0};
  parallel_for(17, [&](int) { total.fetch_add(1); });
  CHECK(total.load() == 17);

  CHECK(max_threads() >= 1);
}
