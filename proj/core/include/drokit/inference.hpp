#pragma once

#include <Eigen/Core>
#include <utility>
#include <vector>

#include "drokit/losses.hpp"

namespace drokit {

// Plug-in sandwich covariance V H^-1 ... for the joint dual estimate: with
// z = (theta, lambda, eta) and g the dual objective, H is a central finite
// difference of the analytic gradient of g, V the top-left d x d block of
// H^-1, and C the weighted covariance of the per-row influence terms
// f_k*'((l_i - eta)/lambda) grad l_i(theta). Returns the symmetrized
// V C V (the d x d asymptotic covariance of sqrt(n)(theta_hat - theta*)).
// Requires a smooth loss kind, rho > 0, lambda > 0, and at least one row
// with loss above eta (otherwise the curvature degenerates).
Eigen::MatrixXd asymptotic_covariance(const loss_model& model, const dataset& data, double k,
                                      double rho, const Eigen::VectorXd& theta, double lambda,
                                      double eta);

struct inference_report {
  Eigen::VectorXd theta;
  Eigen::MatrixXd covariance;
  std::vector<std::pair<double, double>> intervals;
  double level = 0.0;
  std::ptrdiff_t n = 0;
};

// Per-coordinate normal intervals theta_j +- z_{(1+level)/2} sqrt(Cov_jj / n).
inference_report confidence_intervals(const loss_model& model, const dataset& data, double k,
                                      double rho, const Eigen::VectorXd& theta, double lambda,
                                      double eta, double level);

}  // namespace drokit
