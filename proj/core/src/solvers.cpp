#include "drokit/solvers.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "drokit/errors.hpp"
#include "drokit/rng.hpp"
#include "drokit/robust_risk.hpp"

namespace drokit {

namespace {

void validate_fit_config(const fit_config& config) {
  if (config.max_iter < 1) throw invalid_spec("fit: max_iter must be >= 1");
  if (!(config.grad_tol > 0.0)) throw invalid_spec("fit: grad_tol must be positive");
  if (!(config.init_step > 0.0)) throw invalid_spec("fit: init_step must be positive");
  if (!(config.armijo_c > 0.0 && config.armijo_c < 1.0))
    throw invalid_spec("fit: armijo_c must lie in (0, 1)");
  if (!(config.backtrack > 0.0 && config.backtrack < 1.0))
    throw invalid_spec("fit: backtrack must lie in (0, 1)");
}

struct descent_problem {
  std::function<double(const Eigen::VectorXd&)> objective;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> subgradient;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> project;
};

constexpr int kMaxBacktracks = 30;

// Armijo-backtracked projected descent; switches permanently to decaying
// subgradient steps with best-iterate tracking once a line search exhausts
// its backtracks (nonsmooth objectives near kinks). The trace records only
// accepted improvements, so it is nonincreasing by construction.
fit_result projected_descent(const descent_problem& problem, Eigen::VectorXd start,
                             const fit_config& config) {
  validate_fit_config(config);

  Eigen::VectorXd theta = problem.project(std::move(start));
  double value = problem.objective(theta);
  if (!std::isfinite(value)) throw non_finite_objective("fit: objective not finite at start");

  fit_result out;
  out.trace.emplace_back(0, value);
  Eigen::VectorXd best_theta = theta;
  double best_value = value;
  bool decay_mode = false;

  int iter = 1;
  for (; iter <= config.max_iter; ++iter) {
    Eigen::VectorXd grad = problem.subgradient(theta);
    if (!grad.allFinite()) throw non_finite_objective("fit: subgradient not finite");

    const double map_norm = (theta - problem.project(theta - grad)).norm();
    if (map_norm <= config.grad_tol) {
      out.converged = true;
      break;
    }

    if (!decay_mode) {
      const double slope = grad.squaredNorm();
      double t = config.init_step;
      bool accepted = false;
      for (int bt = 0; bt < kMaxBacktracks; ++bt) {
        Eigen::VectorXd cand = problem.project(theta - t * grad);
        const double cand_value = problem.objective(cand);
        if (std::isfinite(cand_value) && cand_value <= value - config.armijo_c * t * slope) {
          theta = std::move(cand);
          value = cand_value;
          accepted = true;
          break;
        }
        t *= config.backtrack;
      }
      if (accepted) {
        out.trace.emplace_back(iter, value);
        if (value < best_value) {
          best_value = value;
          best_theta = theta;
        }
        continue;
      }
      decay_mode = true;
    }

    const double t = config.init_step / std::sqrt(static_cast<double>(iter) + 1.0);
    theta = problem.project(theta - t * grad);
    value = problem.objective(theta);
    if (!std::isfinite(value)) throw non_finite_objective("fit: objective not finite");
    if (value < best_value) {
      best_value = value;
      best_theta = theta;
      out.trace.emplace_back(iter, value);
    }
  }

  out.iterations = std::min(iter, config.max_iter);
  out.theta = std::move(best_theta);
  out.objective = best_value;
  return out;
}

double golden_max(const std::function<double(double)>& f, double lo, double hi, int iters) {
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters; ++i) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

fit_result fit_erm(const loss_model& model, const dataset& data, const constraint_set& constraint,
                   const fit_config& config) {
  descent_problem problem;
  problem.objective = [&](const Eigen::VectorXd& theta) {
    return data.base_weights.dot(loss_values(model, theta, data));
  };
  problem.subgradient = [&](const Eigen::VectorXd& theta) -> Eigen::VectorXd {
    return loss_subgradients(model, theta, data).transpose() * data.base_weights;
  };
  problem.project = [&](const Eigen::VectorXd& theta) { return project(theta, constraint); };
  return projected_descent(problem, Eigen::VectorXd::Zero(model.dim), config);
}

fit_result fit_dro(const loss_model& model, const dataset& data, const divergence_spec& spec,
                   const constraint_set& constraint, const fit_config& config) {
  descent_problem problem;
  problem.objective = [&](const Eigen::VectorXd& theta) {
    return robust_risk(loss_values(model, theta, data), data.base_weights, spec).risk;
  };
  problem.subgradient = [&](const Eigen::VectorXd& theta) {
    return robust_gradient(model, theta, data, spec);
  };
  problem.project = [&](const Eigen::VectorXd& theta) { return project(theta, constraint); };
  return projected_descent(problem, Eigen::VectorXd::Zero(model.dim), config);
}

joint_dual_fit_result fit_joint_dual(const loss_model& model, const dataset& data, double k,
                                     double rho, const fit_config& config) {
  if (model.kind != loss_kind::squared && model.kind != loss_kind::binary_logistic)
    throw unsupported_loss("fit_joint_dual: requires a smooth loss (squared or binary_logistic)");
  if (!(rho > 0.0)) throw invalid_spec("fit_joint_dual: rho must be positive");
  const auto spec = divergence_spec::cressie_read(k, rho);
  const int d = model.dim;
  const Eigen::VectorXd& p = data.base_weights;
  const std::ptrdiff_t n = p.size();
  constexpr double kLambdaFloor = 1e-12;

  // Stacked variable z = (theta, lambda, eta).
  descent_problem problem;
  problem.project = [&](Eigen::VectorXd z) {
    z(d) = std::max(z(d), kLambdaFloor);
    return z;
  };
  problem.objective = [&](const Eigen::VectorXd& z) {
    const Eigen::VectorXd losses = loss_values(model, z.head(d), data);
    const double lambda = z(d), eta = z(d + 1);
    double acc = 0.0;
    for (std::ptrdiff_t i = 0; i < n; ++i)
      acc += p(i) * f_conjugate(k, (losses(i) - eta) / lambda);
    return lambda * acc + rho * lambda + eta;
  };
  problem.subgradient = [&](const Eigen::VectorXd& z) -> Eigen::VectorXd {
    const Eigen::VectorXd theta = z.head(d);
    const Eigen::VectorXd losses = loss_values(model, theta, data);
    const Eigen::MatrixXd grads = loss_subgradients(model, theta, data);
    const double lambda = z(d), eta = z(d + 1);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(d + 2);
    double sum_t = 0.0, sum_fstar = 0.0, sum_st = 0.0;
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const double s = (losses(i) - eta) / lambda;
      const double t = f_conjugate_derivative(k, s);
      sum_t += p(i) * t;
      sum_fstar += p(i) * f_conjugate(k, s);
      sum_st += p(i) * s * t;
      g.head(d) += (p(i) * t) * grads.row(i).transpose();
    }
    g(d) = sum_fstar - sum_st + rho;
    g(d + 1) = 1.0 - sum_t;
    return g;
  };

  // Warm-start (lambda, eta) from the exact inner solve at theta = 0.
  const auto warm =
      robust_risk(loss_values(model, Eigen::VectorXd::Zero(d), data), p, spec);
  double lambda0 = warm.lambda_star;
  if (!std::isfinite(lambda0) || lambda0 < 1e-6) lambda0 = 1e-6;
  double eta0 = std::isfinite(warm.eta_star) ? warm.eta_star + lambda0 / (k - 1.0) : warm.risk;

  Eigen::VectorXd z0 = Eigen::VectorXd::Zero(d + 2);
  z0(d) = lambda0;
  z0(d + 1) = eta0;
  const fit_result fit = projected_descent(problem, std::move(z0), config);

  joint_dual_fit_result out;
  out.theta = fit.theta.head(d);
  out.lambda = fit.theta(d);
  out.eta = fit.theta(d + 1);
  out.objective = fit.objective;
  out.converged = fit.converged;
  out.iterations = fit.iterations;

  // Re-solving the inner problem exactly at the final theta pins (lambda,
  // eta) to the argmin over the dual pair; plain first-order descent leaves
  // them an order of magnitude looser than the bisection does.
  const worst_case inner = robust_risk(loss_values(model, out.theta, data), p, spec);
  if (std::isfinite(inner.eta_star) && std::isfinite(inner.lambda_star)) {
    Eigen::VectorXd cand = fit.theta;
    cand(d) = std::max(inner.lambda_star, kLambdaFloor);
    cand(d + 1) = inner.eta_star + cand(d) / (k - 1.0);
    const double cand_value = problem.objective(cand);
    if (std::isfinite(cand_value) &&
        cand_value <= out.objective + 1e-12 * (1.0 + std::abs(out.objective))) {
      out.lambda = cand(d);
      out.eta = cand(d + 1);
      out.objective = cand_value;
    }
  }
  return out;
}

namespace {

struct maximin_problem {
  std::vector<Eigen::MatrixXd> second_moment;
  std::vector<Eigen::VectorXd> theta_g;

  // min_g 2 theta' S_g theta_g - theta' S_g theta, with the active group.
  std::pair<double, std::size_t> value(const Eigen::VectorXd& theta) const {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t g = 0; g < second_moment.size(); ++g) {
      const Eigen::VectorXd st = second_moment[g] * theta;
      const double v = 2.0 * theta_g[g].dot(st) - theta.dot(st);
      if (v < best) {
        best = v;
        arg = g;
      }
    }
    return {best, arg};
  }

  Eigen::VectorXd supergradient(const Eigen::VectorXd& theta, std::size_t g) const {
    return 2.0 * (second_moment[g] * (theta_g[g] - theta));
  }
};

}  // namespace

Eigen::VectorXd maximin_oracle(const dataset& data, const maximin_options& options) {
  if (!data.groups)
    throw schema_mismatch("maximin_oracle: dataset has no group column");
  if (options.restarts < 1 || options.max_iter < 1)
    throw invalid_spec("maximin_oracle: restarts and max_iter must be >= 1");
  const std::ptrdiff_t n = data.features.rows();
  const std::ptrdiff_t d = data.features.cols();

  std::vector<double> labels(data.groups->data(), data.groups->data() + n);
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  if (labels.size() < 2)
    throw schema_mismatch("maximin_oracle: need at least two distinct groups");

  maximin_problem problem;
  for (const double label : labels) {
    std::vector<std::ptrdiff_t> rows;
    for (std::ptrdiff_t i = 0; i < n; ++i)
      if ((*data.groups)(i) == label) rows.push_back(i);
    if (static_cast<std::ptrdiff_t>(rows.size()) < d)
      throw too_few_rows("maximin_oracle: group " + std::to_string(label) +
                         " has fewer rows than dimensions");
    Eigen::MatrixXd x(rows.size(), d);
    Eigen::VectorXd y(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      x.row(r) = data.features.row(rows[r]);
      y(r) = data.targets(rows[r]);
    }
    Eigen::MatrixXd s = (x.transpose() * x) / static_cast<double>(rows.size());
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
    if (eig.eigenvalues().minCoeff() <=
        1e-12 * std::max(1.0, eig.eigenvalues().maxCoeff()))
      throw singular_group_covariance("maximin_oracle: group " + std::to_string(label) +
                                      " has singular second-moment matrix");
    Eigen::VectorXd tg;
    if (options.injected_group_params) {
      bool found = false;
      for (const auto& [lab, vec] : *options.injected_group_params) {
        if (lab == label) {
          if (vec.size() != d)
            throw dimension_mismatch("maximin_oracle: injected parameter has wrong size");
          tg = vec;
          found = true;
          break;
        }
      }
      if (!found)
        throw schema_mismatch("maximin_oracle: no injected parameter for group " +
                              std::to_string(label));
    } else {
      tg = s.ldlt().solve(x.transpose() * y / static_cast<double>(rows.size()));
    }
    problem.second_moment.push_back(std::move(s));
    problem.theta_g.push_back(std::move(tg));
  }

  double curvature = 0.0, scale = 1.0;
  for (std::size_t g = 0; g < problem.second_moment.size(); ++g) {
    curvature = std::max(curvature, problem.second_moment[g].norm());
    scale = std::max(scale, problem.theta_g[g].norm());
  }
  const double step0 = 1.0 / (1.0 + 2.0 * curvature);

  rng_t rng(derive_seed(options.seed, 77));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::exponential_distribution<double> expo(1.0);

  Eigen::VectorXd overall_best;
  double overall_value = -std::numeric_limits<double>::infinity();
  const std::size_t m = problem.theta_g.size();

  for (int r = 0; r < options.restarts; ++r) {
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(d);
    if (r == 0) {
      for (std::size_t g = 0; g < m; ++g) theta += problem.theta_g[g];
      theta /= static_cast<double>(m);
    } else {
      Eigen::VectorXd w(m);
      for (std::size_t g = 0; g < m; ++g) w(g) = expo(rng);
      w /= w.sum();
      for (std::size_t g = 0; g < m; ++g) theta += w(g) * problem.theta_g[g];
      for (std::ptrdiff_t j = 0; j < d; ++j) theta(j) += 0.1 * scale * normal(rng);
    }

    Eigen::VectorXd local_best = theta;
    double local_value = problem.value(theta).first;
    for (int t = 0; t < options.max_iter; ++t) {
      const auto [v, g] = problem.value(theta);
      if (v > local_value) {
        local_value = v;
        local_best = theta;
      }
      theta += (step0 / std::sqrt(static_cast<double>(t) + 1.0)) * problem.supergradient(theta, g);
    }

    // Line-searched polish from the best decayed iterate.
    theta = local_best;
    for (int t = 0; t < 200; ++t) {
      const auto [v, g] = problem.value(theta);
      const Eigen::VectorXd dir = problem.supergradient(theta, g);
      if (dir.norm() < 1e-14) break;
      const auto along = [&](double u) { return problem.value(theta + u * dir).first; };
      const double u = golden_max(along, 0.0, 4.0 * step0, 120);
      const double vnew = along(u);
      if (vnew <= v + 1e-15 * (1.0 + std::abs(v))) break;
      theta += u * dir;
    }
    const double final_value = problem.value(theta).first;
    if (final_value > local_value) {
      local_value = final_value;
      local_best = theta;
    }

    if (local_value > overall_value) {
      overall_value = local_value;
      overall_best = local_best;
    }
  }
  return overall_best;
}

Eigen::VectorXd chebyshev_center(const Eigen::MatrixXd& points) {
  if (points.rows() < 1) throw empty_input("chebyshev_center: no points");
  const std::ptrdiff_t m = points.rows();

  const auto farthest = [&](const Eigen::VectorXd& theta) {
    double best = -1.0;
    std::ptrdiff_t arg = 0;
    for (std::ptrdiff_t v = 0; v < m; ++v) {
      const double dist = (theta - points.row(v).transpose()).squaredNorm();
      if (dist > best) {
        best = dist;
        arg = v;
      }
    }
    return std::make_pair(best, arg);
  };

  Eigen::VectorXd theta = points.colwise().mean().transpose();
  Eigen::VectorXd best_theta = theta;
  double best_value = farthest(theta).first;

  constexpr int kIters = 200000;
  for (int t = 0; t < kIters; ++t) {
    const auto [value, arg] = farthest(theta);
    if (value < best_value) {
      best_value = value;
      best_theta = theta;
    }
    // gradient 2(theta - p_arg) with step 1/(2(t+1)): a running average of
    // the active farthest points.
    theta += (points.row(arg).transpose() - theta) / (static_cast<double>(t) + 1.0);
  }
  if (farthest(theta).first < best_value) best_theta = theta;
  return best_theta;
}

}  // namespace drokit
