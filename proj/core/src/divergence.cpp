#include "drokit/divergence.hpp"

#include <cmath>
#include <limits>

#include "drokit/errors.hpp"
#include "drokit/stats.hpp"

namespace drokit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kProbTol = 1e-12;

void check_probability(const Eigen::VectorXd& v, const char* name) {
  if (v.size() == 0) throw empty_input(std::string(name) + ": empty vector");
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!(v[i] >= 0.0)) throw not_a_probability(std::string(name) + ": negative entry");
  }
  const double sum = compensated_sum(v.data(), v.size());
  if (std::abs(sum - 1.0) > kProbTol)
    throw not_a_probability(std::string(name) + ": entries do not sum to 1");
}

void check_cr_index(double k) {
  if (!(k > 1.0) || !std::isfinite(k)) throw invalid_spec("Cressie-Read index k must be finite and > 1");
}

}  // namespace

divergence_spec divergence_spec::cressie_read(double k, double rho) {
  check_cr_index(k);
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw invalid_spec("rho must be finite and >= 0");
  divergence_spec s;
  s.family = divergence_family::cressie_read;
  s.k = k;
  s.rho = rho;
  return s;
}

divergence_spec divergence_spec::cvar(double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw invalid_spec("CVaR level alpha must lie in (0, 1]");
  divergence_spec s;
  s.family = divergence_family::cvar;
  s.alpha = alpha;
  return s;
}

double divergence_spec::conjugate_exponent() const {
  check_cr_index(k);
  return k / (k - 1.0);
}

double f_value(double k, double t) {
  check_cr_index(k);
  if (t < 0.0) return kInf;
  if (t == 0.0) return 1.0 / k;
  return (std::pow(t, k) - k * t + k - 1.0) / (k * (k - 1.0));
}

double f_conjugate(double k, double s) {
  check_cr_index(k);
  const double h = (k - 1.0) * s + 1.0;
  if (h <= 0.0) return -1.0 / k;
  return (std::pow(h, k / (k - 1.0)) - 1.0) / k;
}

double f_conjugate_derivative(double k, double s) {
  check_cr_index(k);
  const double h = (k - 1.0) * s + 1.0;
  if (h <= 0.0) return 0.0;
  return std::pow(h, 1.0 / (k - 1.0));
}

double divergence(const Eigen::VectorXd& q, const Eigen::VectorXd& p,
                  const divergence_spec& spec) {
  if (q.size() != p.size()) throw length_mismatch("divergence: q and p differ in length");
  check_probability(q, "q");
  check_probability(p, "p");

  if (spec.family == divergence_family::cvar) {
    const double cap = 1.0 / spec.alpha;
    for (Eigen::Index i = 0; i < q.size(); ++i) {
      if (p[i] == 0.0) {
        if (q[i] > 0.0) return kInf;
        continue;
      }
      // Relative slack matches kProbTol: boundary atoms sit exactly at the
      // cap and must not flip to infeasible over a rounding.
      if (q[i] > p[i] * cap * (1.0 + kProbTol)) return kInf;
    }
    return 0.0;
  }

  double total = 0.0;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    if (p[i] == 0.0) {
      if (q[i] > 0.0) return kInf;  // not absolutely continuous
      continue;
    }
    const double term = f_value(spec.k, q[i] / p[i]);
    if (std::isinf(term)) return kInf;
    total += p[i] * term;
  }
  return total;
}

double dual_coefficient(double k, double rho) {
  check_cr_index(k);
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw invalid_spec("rho must be finite and >= 0");
  return std::pow(1.0 + k * (k - 1.0) * rho, 1.0 / k);
}

double saturation_divergence(const Eigen::VectorXd& p, int i, double k) {
  check_probability(p, "p");
  check_cr_index(k);
  if (i < 0 || i >= p.size()) throw index_out_of_range("saturation_divergence: atom index");
  if (p[i] == 0.0) return kInf;
  double total = p[i] * f_value(k, 1.0 / p[i]);
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    if (j == i) continue;
    total += p[j] * f_value(k, 0.0);
  }
  return total;
}

}  // namespace drokit
