#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "drokit/divergence.hpp"
#include "drokit/losses.hpp"

namespace drokit {

struct fit_config {
  int max_iter = 5000;
  double grad_tol = 1e-8;    // on the projected-gradient-mapping norm
  double init_step = 1.0;
  double armijo_c = 1e-4;
  double backtrack = 0.5;
  std::uint64_t seed = 0;
};

struct fit_result {
  Eigen::VectorXd theta;
  double objective = 0.0;
  // (iteration, objective) after each accepted step; nonincreasing.
  std::vector<std::pair<int, double>> trace;
  bool converged = false;
  int iterations = 0;
};

// Projected subgradient descent with Armijo backtracking from theta = 0.
// If Armijo fails 30 consecutive backtracks (nonsmooth kinds at kinks) the
// run switches to decaying steps init_step / sqrt(iter + 1) with best-iterate
// tracking. Identical inputs give bit-identical results.
fit_result fit_erm(const loss_model& model, const dataset& data,
                   const constraint_set& constraint, const fit_config& config);

// Same engine on the robust objective; rho = 0 reproduces fit_erm.
fit_result fit_dro(const loss_model& model, const dataset& data, const divergence_spec& spec,
                   const constraint_set& constraint, const fit_config& config);

struct joint_dual_fit_result {
  Eigen::VectorXd theta;
  double lambda = 0.0;
  double eta = 0.0;  // generic-dual parameterization
  double objective = 0.0;
  bool converged = false;
  int iterations = 0;
};

// Joint minimization of g(theta, lambda, eta) =
//   E_p[lambda f_k*((l(theta) - eta)/lambda)] + rho lambda + eta
// over theta, lambda >= 1e-12, eta, by the same projected descent on the
// stacked variable. Smooth loss kinds only (squared, binary_logistic).
joint_dual_fit_result fit_joint_dual(const loss_model& model, const dataset& data, double k,
                                     double rho, const fit_config& config);

struct maximin_options {
  int restarts = 50;
  int max_iter = 2000;
  std::uint64_t seed = 1;
  // Group label -> true parameter; per-group OLS is used when absent.
  std::optional<std::vector<std::pair<double, Eigen::VectorXd>>> injected_group_params;
};

// argmax_theta min_g { 2 theta' S_g theta_g - theta' S_g theta } with S_g the
// per-group empirical second-moment matrix: the explained-variance maximin
// benchmark. Concave min-of-concave, solved by supergradient ascent with
// decaying steps, a line-searched polish phase, and restarts.
Eigen::VectorXd maximin_oracle(const dataset& data, const maximin_options& options = {});

// argmin_theta max_v ||theta - points.row(v)||^2 by subgradient descent with
// the strongly-convex step schedule 1/(2(t+1)) (a running average of the
// active farthest points) and best-iterate tracking.
Eigen::VectorXd chebyshev_center(const Eigen::MatrixXd& points);

}  // namespace drokit
