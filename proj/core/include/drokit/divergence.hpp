#pragma once

#include <Eigen/Core>

namespace drokit {

// f-divergence balls used by the robust risk machinery.
//
// Cressie-Read family, index k > 1:
//   f_k(t) = (t^k - k t + k - 1) / (k (k - 1)),  f_k(t) = +inf for t < 0,
// with conjugate
//   f_k*(s) = (1/k) [((k - 1) s + 1)_+^{k_*} - 1],  k_* = k / (k - 1).
// CVaR at level alpha corresponds to the ratio bound q_i / p_i <= 1/alpha.

enum class divergence_family { cressie_read, cvar };

struct divergence_spec {
  divergence_family family = divergence_family::cressie_read;
  double k = 2.0;      // Cressie-Read index, > 1
  double rho = 0.0;    // ball radius, >= 0
  double alpha = 1.0;  // CVaR level, in (0, 1]

  static divergence_spec cressie_read(double k, double rho);
  static divergence_spec cvar(double alpha);

  // k_* = k / (k - 1); only meaningful for the Cressie-Read family.
  double conjugate_exponent() const;
};

// f_k(t); +inf for t < 0, explicit branch f_k(0) = 1/k.
double f_value(double k, double t);

// Convex conjugate f_k*(s); equals -1/k once (k-1)s + 1 <= 0.
double f_conjugate(double k, double s);

// d/ds f_k*(s) = ((k - 1) s + 1)_+^{k_* - 1}.
double f_conjugate_derivative(double k, double s);

// D_f(q || p) = sum_i p_i f(q_i / p_i). +inf is returned exactly (no
// arithmetic is performed on infinite terms). For CVaR specs this is 0 when
// max_i q_i / p_i <= 1/alpha and +inf otherwise.
double divergence(const Eigen::VectorXd& q, const Eigen::VectorXd& p,
                  const divergence_spec& spec);

// c_k(rho) = (1 + k (k - 1) rho)^{1/k}, the coefficient of the reduced dual.
double dual_coefficient(double k, double rho);

// Divergence of the distribution conditioned on atom i from p itself:
// p_i f_k(1 / p_i) + sum_{j != i} p_j f_k(0). The feasibility threshold for
// a point mass on atom i.
double saturation_divergence(const Eigen::VectorXd& p, int i, double k);

}  // namespace drokit
