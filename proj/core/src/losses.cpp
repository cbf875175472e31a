#include "drokit/losses.hpp"

#include <cmath>
#include <vector>

#include "drokit/errors.hpp"
#include "drokit/stats.hpp"

namespace drokit {

namespace {

void check_labels_pm1(const Eigen::VectorXd& y, const char* kind) {
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] != 1.0 && y[i] != -1.0)
      throw schema_mismatch(std::string(kind) + ": labels must be +1 or -1");
  }
}

void check_shapes(const loss_model& model, const Eigen::VectorXd& theta, const dataset& data) {
  if (theta.size() != model.dim)
    throw dimension_mismatch("theta length does not match the model dimension");
  if (data.dim() != model.dim)
    throw dimension_mismatch("dataset width does not match the model dimension");
}

// log(1 + exp(-m)) without overflow for large |m|.
double logistic_loss(double m) {
  if (m > 0.0) return std::log1p(std::exp(-m));
  return -m + std::log1p(std::exp(m));
}

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double tau) {
  Eigen::VectorXd out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double a = std::abs(v[i]) - tau;
    out[i] = a > 0.0 ? (v[i] > 0.0 ? a : -a) : 0.0;
  }
  return out;
}

Eigen::VectorXd l2_shrink(const Eigen::VectorXd& v, double c) {
  const double norm = v.norm();
  if (norm <= c) return Eigen::VectorXd::Zero(v.size());
  return v * (1.0 - c / norm);
}

}  // namespace

dataset dataset::make(Eigen::MatrixXd features, Eigen::VectorXd targets,
                      std::optional<Eigen::VectorXd> groups,
                      std::optional<Eigen::VectorXd> base_weights) {
  const Eigen::Index n = features.rows();
  if (n == 0) throw empty_input("dataset: no rows");
  if (features.cols() == 0) throw empty_input("dataset: no feature columns");
  if (targets.size() != n) throw length_mismatch("dataset: targets length != rows");
  if (groups && groups->size() != n) throw length_mismatch("dataset: groups length != rows");

  dataset d;
  d.features = std::move(features);
  d.targets = std::move(targets);
  d.groups = std::move(groups);
  if (base_weights) {
    if (base_weights->size() != n) throw length_mismatch("dataset: base_weights length != rows");
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!((*base_weights)[i] > 0.0)) throw not_a_probability("dataset: base weights must be > 0");
    }
    const double sum = compensated_sum(base_weights->data(), n);
    if (std::abs(sum - 1.0) > 1e-12) throw not_a_probability("dataset: base weights must sum to 1");
    d.base_weights = std::move(*base_weights);
  } else {
    d.base_weights = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  }
  return d;
}

dataset dataset::subset(const std::vector<int>& rows) const {
  if (rows.empty()) throw empty_input("dataset::subset: no rows selected");
  Eigen::MatrixXd f(static_cast<Eigen::Index>(rows.size()), features.cols());
  Eigen::VectorXd t(static_cast<Eigen::Index>(rows.size()));
  Eigen::VectorXd w(static_cast<Eigen::Index>(rows.size()));
  std::optional<Eigen::VectorXd> g;
  if (groups) g = Eigen::VectorXd(static_cast<Eigen::Index>(rows.size()));
  double wsum = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int r = rows[i];
    if (r < 0 || r >= n()) throw index_out_of_range("dataset::subset: row index");
    f.row(static_cast<Eigen::Index>(i)) = features.row(r);
    t[static_cast<Eigen::Index>(i)] = targets[r];
    w[static_cast<Eigen::Index>(i)] = base_weights[r];
    if (g) (*g)[static_cast<Eigen::Index>(i)] = (*groups)[r];
    wsum += base_weights[r];
  }
  w /= wsum;
  return dataset::make(std::move(f), std::move(t), std::move(g), std::move(w));
}

loss_model loss_model::make(loss_kind kind, int dim) {
  if (dim < 1) throw invalid_spec("loss_model: dim must be >= 1");
  if (kind == loss_kind::linear && dim != 1)
    throw invalid_spec("loss_model: the linear loss is one-dimensional");
  return {kind, dim};
}

constraint_set constraint_set::norm_ball(double a1, double a2, double r) {
  if (!(a1 >= 0.0) || !(a2 >= 0.0) || a1 + a2 <= 0.0)
    throw invalid_spec("constraint_set: need a1, a2 >= 0 with a1 + a2 > 0");
  if (!(r > 0.0)) throw invalid_spec("constraint_set: need r > 0");
  constraint_set c;
  c.constrained = true;
  c.a1 = a1;
  c.a2 = a2;
  c.r = r;
  return c;
}

Eigen::VectorXd loss_values(const loss_model& model, const Eigen::VectorXd& theta,
                            const dataset& data) {
  check_shapes(model, theta, data);
  const Eigen::VectorXd margin = data.features * theta;
  Eigen::VectorXd out(data.n());
  switch (model.kind) {
    case loss_kind::squared:
      for (int i = 0; i < data.n(); ++i) {
        const double r = margin[i] - data.targets[i];
        out[i] = 0.5 * r * r;
      }
      break;
    case loss_kind::absolute:
      for (int i = 0; i < data.n(); ++i) out[i] = std::abs(margin[i] - data.targets[i]);
      break;
    case loss_kind::hinge:
      check_labels_pm1(data.targets, "hinge");
      for (int i = 0; i < data.n(); ++i) {
        const double m = data.targets[i] * margin[i];
        out[i] = m < 1.0 ? 1.0 - m : 0.0;
      }
      break;
    case loss_kind::binary_logistic:
      check_labels_pm1(data.targets, "binary_logistic");
      for (int i = 0; i < data.n(); ++i) out[i] = logistic_loss(data.targets[i] * margin[i]);
      break;
    case loss_kind::linear:
      // loss(theta; z) = theta * z on scalar features; targets are ignored.
      for (int i = 0; i < data.n(); ++i) out[i] = margin[i];
      break;
  }
  return out;
}

Eigen::MatrixXd loss_subgradients(const loss_model& model, const Eigen::VectorXd& theta,
                                  const dataset& data) {
  check_shapes(model, theta, data);
  const Eigen::VectorXd margin = data.features * theta;
  Eigen::MatrixXd out(data.n(), data.dim());
  switch (model.kind) {
    case loss_kind::squared:
      for (int i = 0; i < data.n(); ++i)
        out.row(i) = (margin[i] - data.targets[i]) * data.features.row(i);
      break;
    case loss_kind::absolute:
      for (int i = 0; i < data.n(); ++i) {
        const double r = margin[i] - data.targets[i];
        if (r > 0.0)
          out.row(i) = data.features.row(i);
        else if (r < 0.0)
          out.row(i) = -data.features.row(i);
        else
          out.row(i).setZero();
      }
      break;
    case loss_kind::hinge:
      check_labels_pm1(data.targets, "hinge");
      for (int i = 0; i < data.n(); ++i) {
        const double m = data.targets[i] * margin[i];
        if (m < 1.0)
          out.row(i) = -data.targets[i] * data.features.row(i);
        else
          out.row(i).setZero();
      }
      break;
    case loss_kind::binary_logistic:
      check_labels_pm1(data.targets, "binary_logistic");
      for (int i = 0; i < data.n(); ++i) {
        const double m = data.targets[i] * margin[i];
        const double sig = 1.0 / (1.0 + std::exp(m));  // sigmoid(-m)
        out.row(i) = -data.targets[i] * sig * data.features.row(i);
      }
      break;
    case loss_kind::linear:
      out = data.features;
      break;
  }
  return out;
}

Eigen::VectorXd project(const Eigen::VectorXd& theta, const constraint_set& constraint) {
  if (!constraint.constrained) return theta;
  const double a1 = constraint.a1, a2 = constraint.a2, r = constraint.r;
  const auto value = [&](const Eigen::VectorXd& v) {
    return a1 * v.lpNorm<1>() + a2 * v.norm();
  };
  if (value(theta) <= r) return theta;

  if (a1 == 0.0) {
    // Pure L2 ball: radial scaling.
    return theta * (r / a2 / theta.norm());
  }

  if (a2 == 0.0) {
    // Pure L1 ball: bisect the soft threshold until the norm matches.
    const double target = r / a1;
    double lo = 0.0, hi = theta.lpNorm<Eigen::Infinity>();
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (soft_threshold(theta, mid).lpNorm<1>() > target)
        lo = mid;
      else
        hi = mid;
      if (a1 * std::abs(soft_threshold(theta, hi).lpNorm<1>() - target) <= 1e-10 &&
          hi - lo <= 1e-14 * (1.0 + hi))
        break;
    }
    return soft_threshold(theta, hi);
  }

  // Mixed ball. prox of mu (a1 |.|_1 + a2 |.|_2) composes a soft threshold
  // with an L2 shrink; bisect mu >= 0 to the constraint boundary.
  const auto prox = [&](double mu) {
    return l2_shrink(soft_threshold(theta, mu * a1), mu * a2);
  };
  double lo = 0.0;                                        // infeasible side
  double hi = theta.lpNorm<Eigen::Infinity>() / a1 + 1.0; // prox(hi) == 0, feasible
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (value(prox(mid)) > r)
      lo = mid;
    else
      hi = mid;
    if (std::abs(value(prox(hi)) - r) <= 1e-10) break;
  }
  return prox(hi);
}

}  // namespace drokit
