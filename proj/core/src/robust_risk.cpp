#include "drokit/robust_risk.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "drokit/errors.hpp"
#include "drokit/stats.hpp"

namespace drokit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLambdaFloor = 1e-12;

void validate_pair(const Eigen::VectorXd& losses, const Eigen::VectorXd& p) {
  if (losses.size() != p.size()) throw length_mismatch("robust_risk: losses/weights length");
  if (losses.size() == 0) throw empty_input("robust_risk: empty loss vector");
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (!(p[i] > 0.0)) throw not_a_probability("robust_risk: base weights must be > 0");
  }
  const double sum = compensated_sum(p.data(), p.size());
  if (std::abs(sum - 1.0) > 1e-12) throw not_a_probability("robust_risk: base weights must sum to 1");
  for (Eigen::Index i = 0; i < losses.size(); ++i) {
    if (!std::isfinite(losses[i])) throw non_finite_objective("robust_risk: non-finite loss");
  }
}

// Max-loss atom set and its feasibility as a point mass: the conditional
// distribution on {i : l_i = max} has divergence
// P(S) f_k(1/P(S)) + (1 - P(S)) f_k(0) from p.
struct saturation_info {
  std::vector<int> atoms;
  double mass = 0.0;
  double div = 0.0;
};

saturation_info saturation_set(const Eigen::VectorXd& losses, const Eigen::VectorXd& p,
                               double k, double lmax) {
  saturation_info s;
  for (Eigen::Index i = 0; i < losses.size(); ++i) {
    if (losses[i] == lmax) {
      s.atoms.push_back(static_cast<int>(i));
      s.mass += p[i];
    }
  }
  s.div = s.mass * f_value(k, 1.0 / s.mass) + (1.0 - s.mass) * f_value(k, 0.0);
  return s;
}

Eigen::VectorXd conditional_on(const std::vector<int>& atoms, const Eigen::VectorXd& p,
                               double mass) {
  Eigen::VectorXd q = Eigen::VectorXd::Zero(p.size());
  for (int i : atoms) q[i] = p[i] / mass;
  return q;
}

// Moments of (l - eta)_+ scaled by the max term so intermediate powers stay
// in [0, 1]: returns sum_i p_i r_i^e for r_i = (l_i - eta)_+ / (lmax - eta).
double scaled_moment(const Eigen::VectorXd& losses, const Eigen::VectorXd& p, double eta,
                     double lmax, double e) {
  const double m = lmax - eta;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < losses.size(); ++i) {
    const double u = losses[i] - eta;
    if (u <= 0.0) continue;
    acc += p[i] * std::pow(u / m, e);
  }
  return acc;
}

// Subgradient of the reduced dual objective
//   h(eta) = c * E[(l - eta)_+^{k_*}]^{1/k_*} + eta,
// written scale-free: 1 - c * E[r^{k_*-1}] / E[r^{k_*}]^{1/k}.
double reduced_dual_subgradient(const Eigen::VectorXd& losses, const Eigen::VectorXd& p,
                                double eta, double lmax, double c, double kstar, double k) {
  const double num = scaled_moment(losses, p, eta, lmax, kstar - 1.0);
  const double den = std::pow(scaled_moment(losses, p, eta, lmax, kstar), 1.0 / k);
  return 1.0 - c * num / den;
}

double reduced_dual_value(const Eigen::VectorXd& losses, const Eigen::VectorXd& p, double eta,
                          double lmax, double c, double kstar) {
  const double m = lmax - eta;
  if (m <= 0.0) return eta;
  return c * m * std::pow(scaled_moment(losses, p, eta, lmax, kstar), 1.0 / kstar) + eta;
}

Eigen::VectorXd kkt_weights(const Eigen::VectorXd& losses, const Eigen::VectorXd& p, double eta,
                            double lmax, double kstar) {
  const double m = lmax - eta;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(losses.size());
  for (Eigen::Index i = 0; i < losses.size(); ++i) {
    const double u = losses[i] - eta;
    if (u > 0.0) w[i] = p[i] * std::pow(u / m, kstar - 1.0);
  }
  w /= w.sum();
  return w;
}

worst_case degenerate_case(const Eigen::VectorXd& losses, const Eigen::VectorXd& p) {
  worst_case wc;
  wc.risk = losses[0];
  wc.eta_star = losses[0];
  wc.lambda_star = 0.0;
  wc.weights = p;
  wc.saturated = true;  // the max-loss set is everything, and p lives on it
  wc.inner_iterations = 0;
  return wc;
}

worst_case mean_case(const Eigen::VectorXd& losses, const Eigen::VectorXd& p) {
  worst_case wc;
  wc.risk = p.dot(losses);
  // At rho = 0 the reduced dual's infimum is only approached as eta -> -inf
  // (and lambda -> +inf in the generic dual); report those limits.
  wc.eta_star = -kInf;
  wc.lambda_star = kInf;
  wc.weights = p;
  wc.saturated = false;
  wc.inner_iterations = 0;
  return wc;
}

}  // namespace

worst_case robust_risk_cr(const Eigen::VectorXd& losses, const Eigen::VectorXd& base_weights,
                          double k, double rho) {
  validate_pair(losses, base_weights);
  const divergence_spec spec = divergence_spec::cressie_read(k, rho);  // validates k, rho
  const Eigen::VectorXd& p = base_weights;

  const double lmin = losses.minCoeff();
  const double lmax = losses.maxCoeff();
  if (lmin == lmax) return degenerate_case(losses, p);
  if (rho == 0.0) return mean_case(losses, p);

  const saturation_info sat = saturation_set(losses, p, k, lmax);
  if (sat.div <= rho) {
    worst_case wc;
    wc.risk = lmax;
    wc.eta_star = lmax;  // h(lmax) = lmax attains the unsaturated lower bound
    wc.lambda_star = 0.0;
    wc.weights = conditional_on(sat.atoms, p, sat.mass);
    wc.saturated = true;
    wc.inner_iterations = 0;
    return wc;
  }

  const double c = dual_coefficient(k, rho);
  const double kstar = k / (k - 1.0);
  const double range = lmax - lmin;

  // Depth at which h'(eta) is guaranteed nonpositive: below
  // lmin - range / (c^{k-1} - 1) the subgradient bound
  // 1 - c (Delta / (Delta + range))^{k_*-1} crosses zero.
  const double cpow = std::expm1(std::log1p(k * (k - 1.0) * rho) * (k - 1.0) / k);
  double lo = lmin - range / cpow - 1.0;
  if (!std::isfinite(lo)) lo = -std::numeric_limits<double>::max() / 4.0;
  double hi = lmax;

  const double tol = 1e-12 * (1.0 + range);
  int iters = 0;
  while (iters < 200 && hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (reduced_dual_subgradient(losses, p, mid, lmax, c, kstar, k) >= 0.0)
      hi = mid;
    else
      lo = mid;
    ++iters;
  }
  const double eta = 0.5 * (lo + hi);

  worst_case wc;
  wc.risk = reduced_dual_value(losses, p, eta, lmax, c, kstar);
  wc.eta_star = eta;
  // KKT normalizer of the generic dual: lambda* = (k-1) E[(l-eta*)_+^{k_*-1}]^{k-1}.
  wc.lambda_star =
      (k - 1.0) * (lmax - eta) * std::pow(scaled_moment(losses, p, eta, lmax, kstar - 1.0), k - 1.0);
  wc.weights = kkt_weights(losses, p, eta, lmax, kstar);
  wc.saturated = false;
  wc.inner_iterations = iters;

  // Numerical edge: if the recovered weights sit strictly inside the ball the
  // optimum was actually saturated; push mass toward the max-loss atoms until
  // the budget binds.
  if (divergence(wc.weights, p, spec) < rho - 1e-8) {
    const Eigen::VectorXd target = conditional_on(sat.atoms, p, sat.mass);
    double tlo = 0.0, thi = 1.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (tlo + thi);
      const Eigen::VectorXd q = (1.0 - mid) * p + mid * target;
      if (divergence(q, p, spec) <= rho)
        tlo = mid;
      else
        thi = mid;
    }
    wc.weights = (1.0 - tlo) * p + tlo * target;
  }
  return wc;
}

namespace {

// Generic dual objective g(lambda, eta) = E_p[lambda f*((l-eta)/lambda)] + rho lambda + eta
// and its partial derivatives. t_i = f*'((l_i-eta)/lambda) are the candidate
// weight ratios; dg/dlambda = rho - D_f(t) by the Fenchel identity
// f*(s) - s f*'(s) = -f(f*'(s)).
struct generic_dual {
  const Eigen::VectorXd& losses;
  const Eigen::VectorXd& p;
  double k;
  double rho;

  double value(double lambda, double eta) const {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < losses.size(); ++i)
      acc += p[i] * f_conjugate(k, (losses[i] - eta) / lambda);
    return lambda * acc + rho * lambda + eta;
  }

  double deta(double lambda, double eta) const {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < losses.size(); ++i)
      acc += p[i] * f_conjugate_derivative(k, (losses[i] - eta) / lambda);
    return 1.0 - acc;
  }

  double dlambda(double lambda, double eta) const {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < losses.size(); ++i) {
      const double t = f_conjugate_derivative(k, (losses[i] - eta) / lambda);
      const double ft = f_value(k, t);
      if (std::isinf(ft)) return -kInf;
      acc += p[i] * ft;
    }
    return rho - acc;
  }

  // Exact 1-D minimization in eta at fixed lambda (deta is nondecreasing).
  double minimize_eta(double lambda, double eta0, double range) const {
    double hi = losses.maxCoeff();  // deta >= 0 there since f*' <= 1 on s <= 0
    double lo = std::min(eta0, losses.minCoeff());
    double step = range + 1.0;
    while (deta(lambda, lo) > 0.0) {
      lo -= step;
      step *= 2.0;
      if (!std::isfinite(lo)) throw numerical_failure("generic dual: eta bracket failed");
    }
    const double tol = 1e-13 * (1.0 + range);
    while (hi - lo > tol) {
      const double mid = 0.5 * (lo + hi);
      if (deta(lambda, mid) >= 0.0)
        hi = mid;
      else
        lo = mid;
    }
    return 0.5 * (lo + hi);
  }

  // Exact 1-D minimization in lambda at fixed eta (dlambda is nondecreasing);
  // clamps at the floor when even there the derivative is nonnegative.
  double minimize_lambda(double eta, double lambda0) const {
    double lo = kLambdaFloor;
    if (dlambda(lo, eta) >= 0.0) return lo;
    double hi = std::max(lambda0, 1.0);
    int doublings = 0;
    while (dlambda(hi, eta) < 0.0) {
      hi *= 2.0;
      if (++doublings > 300) throw numerical_failure("generic dual: lambda bracket failed");
    }
    while (hi - lo > 1e-13 * (1.0 + hi)) {
      const double mid = 0.5 * (lo + hi);
      if (dlambda(mid, eta) >= 0.0)
        hi = mid;
      else
        lo = mid;
    }
    return 0.5 * (lo + hi);
  }
};

// Golden-section minimization of a convex 1-D function on [0, hi].
double golden_min(const std::function<double(double)>& f, double hi) {
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = 0.0, b = hi;
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 160; ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = f(x2);
    }
  }
  return f1 <= f2 ? x1 : x2;
}

}  // namespace

worst_case robust_risk_dual_generic(const Eigen::VectorXd& losses,
                                    const Eigen::VectorXd& base_weights,
                                    const divergence_spec& spec) {
  if (spec.family == divergence_family::cvar)
    return cvar(losses, base_weights, spec.alpha);  // lambda drops out of the dual

  validate_pair(losses, base_weights);
  const Eigen::VectorXd& p = base_weights;
  const double k = spec.k, rho = spec.rho;

  const double lmin = losses.minCoeff();
  const double lmax = losses.maxCoeff();
  if (lmin == lmax) return degenerate_case(losses, p);
  if (rho == 0.0) return mean_case(losses, p);

  const saturation_info sat = saturation_set(losses, p, k, lmax);
  if (sat.div <= rho) {
    // inf attained in the limit lambda -> 0, eta -> lmax.
    worst_case wc;
    wc.risk = lmax;
    wc.eta_star = lmax;
    wc.lambda_star = 0.0;
    wc.weights = conditional_on(sat.atoms, p, sat.mass);
    wc.saturated = true;
    wc.inner_iterations = 0;
    return wc;
  }

  const generic_dual dual{losses, p, k, rho};
  const double range = lmax - lmin;

  double lambda = range, eta = p.dot(losses);
  double prev_lambda = lambda, prev_eta = eta;
  double value = dual.value(lambda, eta);
  int sweeps = 0;
  int small_changes = 0;
  bool converged = false;
  while (sweeps < 2000) {
    ++sweeps;
    eta = dual.minimize_eta(lambda, eta, range);
    lambda = dual.minimize_lambda(eta, lambda);

    // Alternating steps crawl along near-diagonal valleys; a periodic exact
    // line search along the sweep displacement removes that slow mode.
    if (sweeps >= 2) {
      const double dl = lambda - prev_lambda, de = eta - prev_eta;
      if (dl != 0.0 || de != 0.0) {
        const auto along = [&](double t) {
          const double lam = std::max(kLambdaFloor, lambda + t * dl);
          return dual.value(lam, eta + t * de);
        };
        const double t = golden_min(along, 8.0);
        const double cand_lambda = std::max(kLambdaFloor, lambda + t * dl);
        const double cand_eta = eta + t * de;
        if (dual.value(cand_lambda, cand_eta) < dual.value(lambda, eta)) {
          lambda = cand_lambda;
          eta = cand_eta;
          eta = dual.minimize_eta(lambda, eta, range);
          lambda = dual.minimize_lambda(eta, lambda);
        }
      }
    }
    // Leave eta exactly matched to the final lambda of the sweep: the value
    // only decreases, and the reported weights come out stationary in eta.
    eta = dual.minimize_eta(lambda, eta, range);

    const bool tiny_move =
        std::abs(lambda - prev_lambda) <= 1e-9 * (1.0 + std::abs(lambda)) &&
        std::abs(eta - prev_eta) <= 1e-9 * (1.0 + range);
    prev_lambda = lambda;
    prev_eta = eta;

    const double next = dual.value(lambda, eta);
    if (std::abs(value - next) <= 1e-11 * (1.0 + std::abs(next)))
      ++small_changes;
    else
      small_changes = 0;
    value = next;
    // A gradient test in eta breaks down when lambda* is small (the slope of
    // deta blows up like 1/lambda), so stationarity is declared when the
    // exact block minimizations stop moving and the value has plateaued.
    if (small_changes >= 2 && tiny_move) {
      converged = true;
      break;
    }
  }
  if (!converged) throw numerical_failure("generic dual: sweep budget exhausted");

  worst_case wc;
  wc.risk = value;
  wc.eta_star = eta - lambda / (k - 1.0);  // reduced-dual parameterization
  wc.lambda_star = lambda;
  Eigen::VectorXd w(losses.size());
  for (Eigen::Index i = 0; i < losses.size(); ++i)
    w[i] = p[i] * f_conjugate_derivative(k, (losses[i] - eta) / lambda);
  wc.weights = w / w.sum();
  wc.saturated = false;
  wc.inner_iterations = sweeps;
  return wc;
}

worst_case cvar(const Eigen::VectorXd& losses, const Eigen::VectorXd& base_weights, double alpha) {
  validate_pair(losses, base_weights);
  if (!(alpha > 0.0 && alpha <= 1.0)) throw invalid_spec("cvar: alpha must lie in (0, 1]");
  const Eigen::VectorXd& p = base_weights;
  const int n = static_cast<int>(losses.size());

  const double lmax = losses.maxCoeff();
  if (losses.minCoeff() == lmax) return degenerate_case(losses, p);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (losses[a] != losses[b]) return losses[a] > losses[b];
    return a < b;  // loss ties broken by index
  });

  // Fill the tail at the capped ratio p_i / alpha; the boundary atom takes
  // exactly the residual mass.
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  double remaining = 1.0;
  for (int idx : order) {
    if (remaining <= 0.0) break;
    const double take = std::min(p[idx] / alpha, remaining);
    w[idx] = take;
    remaining -= take;
  }

  // eta* = smallest atom value whose strict upper tail mass is <= alpha.
  double eta = lmax;
  {
    double cum = 0.0;  // mass of losses <= the value just scanned (ascending)
    for (std::size_t j = order.size(); j-- > 0;) {
      const double v = losses[order[j]];
      cum += p[order[j]];
      while (j > 0 && losses[order[j - 1]] == v) {  // absorb the tie block
        --j;
        cum += p[order[j]];
      }
      if (1.0 - cum <= alpha) {
        eta = v;
        break;
      }
    }
  }

  double tail_excess = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = losses[i] - eta;
    if (u > 0.0) tail_excess += p[i] * u;
  }

  double sat_mass = 0.0;
  for (int i = 0; i < n; ++i)
    if (losses[i] == lmax) sat_mass += p[i];

  worst_case wc;
  wc.risk = eta + tail_excess / alpha;
  wc.eta_star = eta;
  wc.lambda_star = 0.0;
  wc.weights = w;
  wc.saturated = sat_mass >= alpha;
  wc.inner_iterations = 0;
  return wc;
}

worst_case robust_risk(const Eigen::VectorXd& losses, const Eigen::VectorXd& base_weights,
                       const divergence_spec& spec) {
  if (spec.family == divergence_family::cvar) return cvar(losses, base_weights, spec.alpha);
  return robust_risk_cr(losses, base_weights, spec.k, spec.rho);
}

Eigen::VectorXd robust_gradient(const loss_model& model, const Eigen::VectorXd& theta,
                                const dataset& data, const divergence_spec& spec) {
  const Eigen::VectorXd losses = loss_values(model, theta, data);
  const worst_case wc = robust_risk(losses, data.base_weights, spec);
  const Eigen::MatrixXd grads = loss_subgradients(model, theta, data);
  return grads.transpose() * wc.weights;
}

}  // namespace drokit
