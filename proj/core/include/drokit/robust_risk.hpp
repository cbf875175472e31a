#pragma once

#include <Eigen/Core>

#include "drokit/divergence.hpp"
#include "drokit/losses.hpp"

namespace drokit {

// Worst-case reweighting of an empirical loss vector over an f-divergence
// ball around the base weights.
//
// Invariants on return: weights sum to 1 (1e-10); divergence(weights, p)
// stays within the ball (1e-8 slack); weights.dot(losses) reproduces risk to
// 1e-8 * (1 + |risk|); saturated is set exactly when the conditional
// distribution on the max-loss atoms is itself feasible, in which case risk
// is the max loss.
struct worst_case {
  double risk = 0.0;
  double eta_star = 0.0;     // minimizer of the reduced dual in eta
  double lambda_star = 0.0;  // matching multiplier of the generic dual
  Eigen::VectorXd weights;
  bool saturated = false;
  int inner_iterations = 0;
};

// Cressie-Read robust risk via the reduced dual
//   risk = inf_eta { c_k(rho) * E_p[(l - eta)_+^{k_*}]^{1/k_*} + eta },
// solved by bisection on the sign of the convex objective's subgradient.
// rho = 0 short-circuits to the weighted mean (the infimum is then only
// approached as eta -> -inf, so eta_star/lambda_star are reported as -inf
// and +inf). Constant loss vectors short-circuit to that constant with
// weights = base_weights.
worst_case robust_risk_cr(const Eigen::VectorXd& losses, const Eigen::VectorXd& base_weights,
                          double k, double rho);

// Same risk through the two-variable dual
//   inf_{lambda >= 0, eta} { E_p[lambda f*((l - eta)/lambda)] + lambda rho + eta },
// minimized by alternating exact one-dimensional convex minimizations with a
// periodic line search along the sweep displacement. Cross-checks
// robust_risk_cr; CVaR specs dispatch to the sorted-tail routine (their dual
// drops lambda). eta_star is reported in the reduced-dual parameterization
// (eta_generic - lambda/(k-1)) so both solvers expose comparable fields.
worst_case robust_risk_dual_generic(const Eigen::VectorXd& losses,
                                    const Eigen::VectorXd& base_weights,
                                    const divergence_spec& spec);

// CVaR at level alpha: exact tail average with per-atom weight caps
// base_weights_i / alpha, one fractional atom at the boundary, loss ties
// broken by index. risk equals the dual value eta* + E_p[(l - eta*)_+]/alpha
// at eta* = the smallest atom value whose strict upper tail mass is <= alpha.
worst_case cvar(const Eigen::VectorXd& losses, const Eigen::VectorXd& base_weights, double alpha);

// Dispatch on the spec family.
worst_case robust_risk(const Eigen::VectorXd& losses, const Eigen::VectorXd& base_weights,
                       const divergence_spec& spec);

// Subgradient of the robust risk at theta: sum_i q*_i grad l_i(theta).
// Where every loss is equal the worst-case weights collapse to the base
// weights, so the plain ERM subgradient is returned there by convention.
Eigen::VectorXd robust_gradient(const loss_model& model, const Eigen::VectorXd& theta,
                                const dataset& data, const divergence_spec& spec);

}  // namespace drokit
