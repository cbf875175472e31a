#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>

#include "drokit/divergence.hpp"

namespace drokit::oracle {

// Brute-force verifiers. Deliberately simple and kept on a separate code path
// from the production solvers so the two can check each other.

// sup { q . losses : divergence(q, p, spec) feasible, q in the simplex }.
// Cressie-Read balls walk the penalized path argmax l.q - mu D_f(q, p) with
// the multiplier bisected onto the ball boundary; CVaR boxes use barrier
// ascent from `restarts` random interior starts. Both finish with exact
// pairwise mass transfers and certify against a weak-duality upper bound to
// 2e-7 * (1 + |value|); certification failure throws.
// Guarded to n <= 8: this is a verifier, not a solver.
double simplex_maximize(const Eigen::VectorXd& losses, const Eigen::VectorXd& p,
                        const divergence_spec& spec, int restarts = 20,
                        std::uint64_t seed = 20240915);

// Exact CVaR tail average: weights capped at p_i / alpha, filled from the
// largest loss down (ties by index), one fractional boundary atom.
double cvar_sorted(const Eigen::VectorXd& losses, const Eigen::VectorXd& p, double alpha);

// Central differences, coordinate step = step * (1 + |x_j|).
Eigen::VectorXd finite_difference_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                           const Eigen::VectorXd& x, double step);

}  // namespace drokit::oracle
