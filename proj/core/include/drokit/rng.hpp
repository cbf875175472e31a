#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <random>

namespace drokit {

// Derives an independent stream seed for replication r of a base seed.
// splitmix64 of (seed, stream); stable across platforms and runs.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

using rng_t = std::mt19937_64;

// Uniform draw from the unit sphere in R^d (normalized Gaussian vector).
Eigen::VectorXd sphere_uniform(rng_t& rng, int d);

// Unit vector orthogonal to u, from a Gaussian draw Gram-Schmidt'ed against u.
Eigen::VectorXd orthogonal_unit(rng_t& rng, const Eigen::VectorXd& u);

}  // namespace drokit
