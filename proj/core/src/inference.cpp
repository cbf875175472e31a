#include "drokit/inference.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstddef>

#include "drokit/divergence.hpp"
#include "drokit/errors.hpp"
#include "drokit/stats.hpp"

namespace drokit {

namespace {

// Analytic gradient of the joint dual objective at z = (theta, lambda, eta).
Eigen::VectorXd dual_gradient(const loss_model& model, const dataset& data,
                              const divergence_spec& spec, const Eigen::VectorXd& z) {
  const int d = model.dim;
  const Eigen::VectorXd theta = z.head(d);
  const double lambda = z(d), eta = z(d + 1);
  const Eigen::VectorXd losses = loss_values(model, theta, data);
  const Eigen::MatrixXd grads = loss_subgradients(model, theta, data);
  const Eigen::VectorXd& p = data.base_weights;

  Eigen::VectorXd g = Eigen::VectorXd::Zero(d + 2);
  double sum_t = 0.0, sum_fstar = 0.0, sum_st = 0.0;
  for (std::ptrdiff_t i = 0; i < losses.size(); ++i) {
    const double s = (losses(i) - eta) / lambda;
    const double t = f_conjugate_derivative(spec.k, s);
    sum_t += p(i) * t;
    sum_fstar += p(i) * f_conjugate(spec.k, s);
    sum_st += p(i) * s * t;
    g.head(d) += (p(i) * t) * grads.row(i).transpose();
  }
  g(d) = sum_fstar - sum_st + spec.rho;
  g(d + 1) = 1.0 - sum_t;
  return g;
}

}  // namespace

Eigen::MatrixXd asymptotic_covariance(const loss_model& model, const dataset& data, double k,
                                      double rho, const Eigen::VectorXd& theta, double lambda,
                                      double eta) {
  if (model.kind != loss_kind::squared && model.kind != loss_kind::binary_logistic)
    throw unsupported_loss("asymptotic_covariance: requires a smooth loss");
  if (!(rho > 0.0)) throw invalid_spec("asymptotic_covariance: rho must be positive");
  if (!(lambda > 0.0)) throw invalid_spec("asymptotic_covariance: lambda must be positive");
  if (theta.size() != model.dim)
    throw dimension_mismatch("asymptotic_covariance: theta size does not match model dim");
  const auto spec = divergence_spec::cressie_read(k, rho);
  const int d = model.dim;

  const Eigen::VectorXd losses = loss_values(model, theta, data);
  if ((losses.array() > eta).count() == 0)
    throw hessian_not_pd("asymptotic_covariance: no loss exceeds eta, curvature degenerates");

  Eigen::VectorXd z(d + 2);
  z.head(d) = theta;
  z(d) = lambda;
  z(d + 1) = eta;

  // Central finite differences of the analytic gradient; the lambda step is
  // clamped to keep lambda positive on both sides.
  Eigen::MatrixXd hessian(d + 2, d + 2);
  for (int j = 0; j < d + 2; ++j) {
    double h = 1e-5 * (1.0 + std::abs(z(j)));
    if (j == d) h = std::min(h, 0.5 * lambda);
    Eigen::VectorXd hi = z, lo = z;
    hi(j) += h;
    lo(j) -= h;
    hessian.col(j) = (dual_gradient(model, data, spec, hi) -
                      dual_gradient(model, data, spec, lo)) /
                     (2.0 * h);
  }
  hessian = 0.5 * (hessian + hessian.transpose()).eval();

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hessian);
  if (eig.eigenvalues().minCoeff() <= 0.0)
    throw hessian_not_pd("asymptotic_covariance: dual Hessian is not positive definite");

  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(d + 2, d);
  rhs.topRows(d) = Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd v = hessian.ldlt().solve(rhs).topRows(d);

  // Weighted covariance of the influence terms.
  const Eigen::MatrixXd grads = loss_subgradients(model, theta, data);
  const Eigen::VectorXd& p = data.base_weights;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(d, d);
  for (std::ptrdiff_t i = 0; i < losses.size(); ++i) {
    const double t = f_conjugate_derivative(spec.k, (losses(i) - eta) / lambda);
    const Eigen::VectorXd zi = t * grads.row(i).transpose();
    mean += p(i) * zi;
    second += p(i) * (zi * zi.transpose());
  }
  const Eigen::MatrixXd c = second - mean * mean.transpose();

  const Eigen::MatrixXd sandwich = v * c * v.transpose();
  return 0.5 * (sandwich + sandwich.transpose());
}

inference_report confidence_intervals(const loss_model& model, const dataset& data, double k,
                                      double rho, const Eigen::VectorXd& theta, double lambda,
                                      double eta, double level) {
  if (!(level >= 0.0 && level < 1.0))
    throw invalid_spec("confidence_intervals: level must lie in [0, 1)");
  inference_report report;
  report.theta = theta;
  report.covariance = asymptotic_covariance(model, data, k, rho, theta, lambda, eta);
  report.level = level;
  report.n = data.features.rows();

  const double z = level == 0.0 ? 0.0 : normal_quantile(0.5 * (1.0 + level));
  const auto n = static_cast<double>(report.n);
  for (int j = 0; j < theta.size(); ++j) {
    const double half = z * std::sqrt(std::max(0.0, report.covariance(j, j)) / n);
    report.intervals.emplace_back(theta(j) - half, theta(j) + half);
  }
  return report;
}

}  // namespace drokit
