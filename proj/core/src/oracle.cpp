#include "drokit/oracle.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "drokit/errors.hpp"
#include "drokit/rng.hpp"
#include "drokit/stats.hpp"

namespace drokit::oracle {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void validate(const Eigen::VectorXd& losses, const Eigen::VectorXd& p) {
  if (losses.size() != p.size()) throw length_mismatch("oracle: losses/weights length");
  if (losses.size() == 0) throw empty_input("oracle: empty input");
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (!(p[i] > 0.0)) throw not_a_probability("oracle: base weights must be > 0");
  }
  const double sum = compensated_sum(p.data(), p.size());
  if (std::abs(sum - 1.0) > 1e-12) throw not_a_probability("oracle: base weights must sum to 1");
  for (Eigen::Index i = 0; i < losses.size(); ++i)
    if (!std::isfinite(losses[i])) throw non_finite_objective("oracle: non-finite loss");
}

// Euclidean projection onto the probability simplex (sort-based).
Eigen::VectorXd project_simplex(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double css = 0.0, tau = 0.0;
  int rho_idx = 0;
  double cum = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    cum += u[j];
    const double t = (cum - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) {
      rho_idx = static_cast<int>(j);
      css = cum;
    }
  }
  tau = (css - 1.0) / static_cast<double>(rho_idx + 1);
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = std::max(0.0, v[i] - tau);
  return out;
}

double cr_divergence_of(const Eigen::VectorXd& q, const Eigen::VectorXd& p, double k) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    const double term = f_value(k, q[i] / p[i]);
    if (std::isinf(term)) return kInf;
    acc += p[i] * term;
  }
  return acc;
}

// f_k'(t) = (t^{k-1} - 1) / (k - 1) for t > 0.
double cr_f_prime(double k, double t) {
  return (std::pow(std::max(t, 0.0), k - 1.0) - 1.0) / (k - 1.0);
}

struct barrier_problem {
  const Eigen::VectorXd& losses;
  const Eigen::VectorXd& p;
  const divergence_spec& spec;

  bool feasible_strict(const Eigen::VectorXd& q) const {
    if (spec.family == divergence_family::cressie_read)
      return cr_divergence_of(q, p, spec.k) < spec.rho;
    for (Eigen::Index i = 0; i < q.size(); ++i)
      if (q[i] >= p[i] / spec.alpha) return false;
    return true;
  }

  double value(const Eigen::VectorXd& q, double beta) const {
    double v = losses.dot(q);
    if (spec.family == divergence_family::cressie_read) {
      const double slack = spec.rho - cr_divergence_of(q, p, spec.k);
      if (slack <= 0.0) return -kInf;
      v += beta * std::log(slack);
    } else {
      for (Eigen::Index i = 0; i < q.size(); ++i) {
        const double slack = p[i] / spec.alpha - q[i];
        if (slack <= 0.0) return -kInf;
        v += beta * std::log(slack);
      }
    }
    return v;
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& q, double beta) const {
    Eigen::VectorXd g = losses;
    if (spec.family == divergence_family::cressie_read) {
      const double slack = spec.rho - cr_divergence_of(q, p, spec.k);
      for (Eigen::Index i = 0; i < q.size(); ++i)
        g[i] -= beta / slack * cr_f_prime(spec.k, q[i] / p[i]);
    } else {
      for (Eigen::Index i = 0; i < q.size(); ++i) g[i] -= beta / (p[i] / spec.alpha - q[i]);
    }
    return g;
  }
};

// Boundary polish on the true (linear) objective: transfer mass from a
// low-loss atom to a higher-loss atom at the largest feasible step, swept
// until no pair improves. The barrier phase lands O(beta) inside the ball;
// this walks the last stretch onto the boundary optimum.
void pairwise_polish(const Eigen::VectorXd& losses, const Eigen::VectorXd& p,
                     const divergence_spec& spec, Eigen::VectorXd& q) {
  const Eigen::Index n = q.size();
  const auto feasible = [&](const Eigen::VectorXd& c) {
    if (spec.family == divergence_family::cressie_read)
      return cr_divergence_of(c, p, spec.k) <= spec.rho;
    for (Eigen::Index i = 0; i < n; ++i)
      if (c[i] > p[i] / spec.alpha) return false;
    return true;
  };
  for (int sweep = 0; sweep < 200; ++sweep) {
    bool improved = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (q[i] <= 0.0) continue;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (losses[j] <= losses[i] || q[i] <= 0.0) continue;
        double t_hi = q[i];
        if (spec.family == divergence_family::cvar)
          t_hi = std::min(t_hi, p[j] / spec.alpha - q[j]);
        if (t_hi <= 0.0) continue;
        Eigen::VectorXd cand = q;
        cand[i] -= t_hi;
        cand[j] += t_hi;
        if (!feasible(cand)) {
          // Divergence is convex along the transfer, so the feasible steps
          // form an interval [0, t*]; bisect for the boundary.
          double lo = 0.0, hi = t_hi;
          for (int it = 0; it < 100; ++it) {
            const double mid = 0.5 * (lo + hi);
            cand = q;
            cand[i] -= mid;
            cand[j] += mid;
            if (feasible(cand))
              lo = mid;
            else
              hi = mid;
          }
          if (lo <= 1e-13) continue;
          cand = q;
          cand[i] -= lo;
          cand[j] += lo;
        }
        q = cand;
        improved = true;
      }
    }
    if (!improved) break;
  }
}

// argmax over the simplex of l.q - mu * D_f(q, p), by projected gradient
// ascent with backtracking from a warm start. Concave and smooth with O(1)
// curvature (no barrier blow-up), so plain gradient steps converge.
Eigen::VectorXd penalized_argmax(const Eigen::VectorXd& losses, const Eigen::VectorXd& p,
                                 double k, double mu, const Eigen::VectorXd& q0) {
  Eigen::VectorXd q = q0;
  const auto value = [&](const Eigen::VectorXd& c) {
    return losses.dot(c) - mu * cr_divergence_of(c, p, k);
  };
  double fq = value(q);
  double step = 1.0;
  for (int it = 0; it < 4000; ++it) {
    Eigen::VectorXd g(q.size());
    for (Eigen::Index i = 0; i < q.size(); ++i)
      g[i] = losses[i] - mu * cr_f_prime(k, q[i] / p[i]);
    bool accepted = false;
    for (int bt = 0; bt < 70; ++bt) {
      const Eigen::VectorXd cand = project_simplex(q + step * g);
      const double fc = value(cand);
      if (fc > fq) {
        q = cand;
        fq = fc;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    // The backtracking swept every scale below the current step, so a full
    // miss means the iterate is numerically stationary; concavity makes that
    // the global maximum.
    if (!accepted) break;
    step = std::min(step * 2.0, 1e6);
  }

  // Multiplicative refinement. For k < 2 the penalty curvature blows up like
  // t^{k-2} near zero mass, where additive steps crawl; relative steps reach
  // optima with coordinates many orders of magnitude apart.
  Eigen::VectorXd mq = q.cwiseMax(1e-30);
  mq /= mq.sum();
  double fm = value(mq);
  double mstep = 1.0;
  for (int it = 0; it < 4000; ++it) {
    Eigen::VectorXd g(q.size());
    for (Eigen::Index i = 0; i < q.size(); ++i)
      g[i] = losses[i] - mu * cr_f_prime(k, mq[i] / p[i]);
    bool accepted = false;
    for (int bt = 0; bt < 70; ++bt) {
      Eigen::VectorXd cand(q.size());
      for (Eigen::Index i = 0; i < q.size(); ++i)
        cand[i] = mq[i] * std::exp(std::min(40.0, std::max(-40.0, mstep * g[i])));
      cand /= cand.sum();
      const double fc = value(cand);
      if (fc > fm) {
        mq = cand;
        fm = fc;
        accepted = true;
        break;
      }
      mstep *= 0.5;
    }
    if (!accepted) break;
    mstep = std::min(mstep * 2.0, 1e6);
  }
  if (fm > fq) return mq;
  return q;
}

// Weak-duality upper bound for the Cressie-Read ball at a fixed multiplier:
// U(lambda) = min_eta { E_p[lambda f*((l - eta)/lambda)] + lambda rho + eta }.
// The eta derivative 1 - E_p[f*'((l - eta)/lambda)] is nondecreasing.
double cr_dual_upper(const Eigen::VectorXd& losses, const Eigen::VectorXd& p, double k,
                     double rho, double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) return kInf;
  const auto deta = [&](double eta) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < losses.size(); ++i)
      acc += p[i] * f_conjugate_derivative(k, (losses[i] - eta) / lambda);
    return 1.0 - acc;
  };
  double hi = losses.maxCoeff();
  double lo = losses.minCoeff();
  double step = hi - lo + 1.0;
  while (deta(lo) > 0.0) {
    lo -= step;
    step *= 2.0;
    if (!std::isfinite(lo)) return kInf;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-13 * (1.0 + std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (deta(mid) >= 0.0)
      hi = mid;
    else
      lo = mid;
  }
  const double eta = 0.5 * (lo + hi);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < losses.size(); ++i)
    acc += p[i] * f_conjugate(k, (losses[i] - eta) / lambda);
  return lambda * acc + lambda * rho + eta;
}

// Exact CVaR dual value: the piecewise-linear objective is minimized at an atom.
double cvar_dual_upper(const Eigen::VectorXd& losses, const Eigen::VectorXd& p, double alpha) {
  double best = kInf;
  for (Eigen::Index j = 0; j < losses.size(); ++j) {
    const double eta = losses[j];
    double acc = 0.0;
    for (Eigen::Index i = 0; i < losses.size(); ++i)
      acc += p[i] * std::max(0.0, losses[i] - eta);
    best = std::min(best, eta + acc / alpha);
  }
  return best;
}

}  // namespace

double simplex_maximize(const Eigen::VectorXd& losses, const Eigen::VectorXd& p,
                        const divergence_spec& spec, int restarts, std::uint64_t seed) {
  validate(losses, p);
  if (losses.size() > 8)
    throw size_guard("simplex_maximize: verifier is limited to n <= 8 atoms");
  if (restarts < 1) throw invalid_spec("simplex_maximize: need at least one start");

  const double lmax = losses.maxCoeff();
  if (losses.minCoeff() == lmax) return lmax;

  // Point mass on the max-loss atoms: feasible iff its divergence fits the ball.
  double sat_mass = 0.0;
  for (Eigen::Index i = 0; i < losses.size(); ++i)
    if (losses[i] == lmax) sat_mass += p[i];
  if (spec.family == divergence_family::cressie_read) {
    if (spec.rho == 0.0) return p.dot(losses);
    const double sat_div =
        sat_mass * f_value(spec.k, 1.0 / sat_mass) + (1.0 - sat_mass) * f_value(spec.k, 0.0);
    if (sat_div <= spec.rho) return lmax;
  } else {
    if (sat_mass >= spec.alpha) return lmax;
  }

  double best = -kInf;
  Eigen::VectorXd best_q = p;
  double upper = kInf;

  if (spec.family == divergence_family::cvar) {
    // Box constraints are well conditioned for barrier ascent, and the
    // pairwise polish finishes with exact cap transfers.
    const barrier_problem prob{losses, p, spec};
    rng_t rng(seed);
    std::exponential_distribution<double> expo(1.0);
    for (int start = 0; start < restarts; ++start) {
      Eigen::VectorXd q = p;
      if (start > 0) {
        Eigen::VectorXd r(p.size());
        for (Eigen::Index i = 0; i < r.size(); ++i) r[i] = expo(rng);
        r /= r.sum();
        double tau = 1.0;
        while (tau > 1e-6 && !prob.feasible_strict(p + tau * (r - p))) tau *= 0.5;
        q = p + tau * (r - p);
        if (!prob.feasible_strict(q)) q = p;
      }

      for (double beta = 1.0; beta >= 0.9e-8; beta *= 0.1) {
        double step = 1.0;
        for (int it = 0; it < 400; ++it) {
          const double fq = prob.value(q, beta);
          const Eigen::VectorXd g = prob.gradient(q, beta);
          Eigen::VectorXd cand;
          double fc = -kInf;
          bool accepted = false;
          for (int bt = 0; bt < 60; ++bt) {
            cand = project_simplex(q + step * g);
            fc = prob.value(cand, beta);
            if (fc > fq + 1e-14 * std::abs(fq)) {
              accepted = true;
              break;
            }
            step *= 0.5;
          }
          if (!accepted) break;
          q = cand;
          step = std::min(step * 2.0, 1e6);
        }
      }

      pairwise_polish(losses, p, spec, q);

      const double val = losses.dot(q);
      if (val > best) {
        best = val;
        best_q = q;
      }
    }
    upper = cvar_dual_upper(losses, p, spec.alpha);
  } else {
    // Penalized path: q*(mu) = argmax l.q - mu D_f(q, p) over the simplex.
    // D_f(q*(mu), p) decreases in mu, so bisecting mu puts the path point on
    // the ball boundary, where mu is the exact KKT multiplier. A barrier
    // sweep is avoided on purpose: its curvature grows like 1/beta and
    // gradient ascent stalls well short of certification accuracy.
    const double k = spec.k, rho = spec.rho;
    const auto div_at = [&](const Eigen::VectorXd& q) { return cr_divergence_of(q, p, k); };

    double hi = 1.0;
    Eigen::VectorXd q = penalized_argmax(losses, p, k, hi, p);
    int guard = 0;
    while (div_at(q) > rho) {
      hi *= 2.0;
      q = penalized_argmax(losses, p, k, hi, q);
      if (++guard > 200) throw numerical_failure("simplex_maximize: multiplier bracket failed");
    }
    best = losses.dot(q);
    best_q = q;
    double mu = hi;

    double lo = hi;
    Eigen::VectorXd q_lo = q;
    guard = 0;
    while (div_at(q_lo) <= rho && lo > 1e-14 && guard < 200) {
      lo *= 0.5;
      q_lo = penalized_argmax(losses, p, k, lo, q_lo);
      ++guard;
    }

    for (int it = 0; it < 120; ++it) {
      const double mid = std::sqrt(lo * hi);
      q = penalized_argmax(losses, p, k, mid, q);
      if (div_at(q) <= rho) {
        hi = mid;
        mu = mid;
        const double v = losses.dot(q);
        if (v > best) {
          best = v;
          best_q = q;
        }
      } else {
        lo = mid;
      }
    }

    pairwise_polish(losses, p, spec, best_q);
    best = std::max(best, losses.dot(best_q));

    upper = cr_dual_upper(losses, p, k, rho, mu);
    // KKT-fitted multiplier: on the support, l_i = lambda f'(q_i/p_i) + eta.
    double sxx = 0, sx = 0, sy = 0, sxy = 0, sw = 0;
    for (Eigen::Index i = 0; i < losses.size(); ++i) {
      if (best_q[i] <= 1e-10) continue;
      const double x = cr_f_prime(k, best_q[i] / p[i]);
      sw += p[i];
      sx += p[i] * x;
      sy += p[i] * losses[i];
      sxx += p[i] * x * x;
      sxy += p[i] * x * losses[i];
    }
    const double denom = sw * sxx - sx * sx;
    if (std::abs(denom) > 1e-300) {
      const double lam = (sw * sxy - sx * sy) / denom;
      if (lam > 0.0) upper = std::min(upper, cr_dual_upper(losses, p, k, rho, lam));
    }
  }

  if (!(upper - best <= 2e-7 * (1.0 + std::abs(best)))) {
    char msg[160];
    std::snprintf(msg, sizeof(msg),
                  "simplex_maximize: duality-gap certification failed (primal %.12g, upper %.12g)",
                  best, upper);
    throw numerical_failure(msg);
  }
  return best;
}

double cvar_sorted(const Eigen::VectorXd& losses, const Eigen::VectorXd& p, double alpha) {
  validate(losses, p);
  if (!(alpha > 0.0 && alpha <= 1.0)) throw invalid_spec("cvar_sorted: alpha must lie in (0, 1]");
  const int n = static_cast<int>(losses.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (losses[a] != losses[b]) return losses[a] > losses[b];
    return a < b;
  });
  double remaining = 1.0, acc = 0.0;
  for (int idx : order) {
    if (remaining <= 0.0) break;
    const double take = std::min(p[idx] / alpha, remaining);
    acc += take * losses[idx];
    remaining -= take;
  }
  return acc;
}

Eigen::VectorXd finite_difference_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                           const Eigen::VectorXd& x, double step) {
  if (!(step > 0.0)) throw invalid_spec("finite_difference_gradient: step must be > 0");
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x, xm = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = step * (1.0 + std::abs(x[j]));
    xp[j] = x[j] + h;
    xm[j] = x[j] - h;
    g[j] = (f(xp) - f(xm)) / (2.0 * h);
    xp[j] = x[j];
    xm[j] = x[j];
  }
  return g;
}

}  // namespace drokit::oracle
