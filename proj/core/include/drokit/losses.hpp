#pragma once

#include <Eigen/Core>
#include <optional>

namespace drokit {

// Rows are observations. base_weights is the empirical measure the robust
// machinery reweights; it defaults to uniform 1/n and must stay strictly
// positive with sum 1 (within 1e-12).
struct dataset {
  Eigen::MatrixXd features;                // n x d
  Eigen::VectorXd targets;                 // n
  std::optional<Eigen::VectorXd> groups;   // n, real-valued group labels
  Eigen::VectorXd base_weights;            // n

  static dataset make(Eigen::MatrixXd features, Eigen::VectorXd targets,
                      std::optional<Eigen::VectorXd> groups = std::nullopt,
                      std::optional<Eigen::VectorXd> base_weights = std::nullopt);

  int n() const { return static_cast<int>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }

  // Rows at the given indices, with base weights renormalized to sum 1.
  dataset subset(const std::vector<int>& rows) const;
};

enum class loss_kind { squared, absolute, hinge, binary_logistic, linear };

struct loss_model {
  loss_kind kind = loss_kind::squared;
  int dim = 1;

  static loss_model make(loss_kind kind, int dim);
};

// Feasible set {theta : a1 ||theta||_1 + a2 ||theta||_2 <= r}, or everything.
struct constraint_set {
  bool constrained = false;
  double a1 = 0.0;
  double a2 = 0.0;
  double r = 0.0;

  static constraint_set unconstrained() { return {}; }
  static constraint_set norm_ball(double a1, double a2, double r);
};

// Per-row losses at theta. Kinds: squared 1/2 (y - x't)^2, absolute |x't - y|,
// hinge (1 - y x't)_+, binary_logistic log(1 + exp(-y x't)) with labels +/-1,
// linear t*z on 1-d features (targets unused).
Eigen::VectorXd loss_values(const loss_model& model, const Eigen::VectorXd& theta,
                            const dataset& data);

// Per-row subgradients (n x d). At kinks the subgradient from the zero-loss
// side is returned (hinge at margin 1 and absolute at residual 0 give 0).
Eigen::MatrixXd loss_subgradients(const loss_model& model, const Eigen::VectorXd& theta,
                                  const dataset& data);

// Euclidean projection onto the constraint set. Feasible points are returned
// unchanged. Pure L2 balls project radially; pure L1 balls soft-threshold
// with a bisected threshold; mixed balls bisect the Lagrange multiplier of
// the combined norm with an inner soft-threshold. Constraint residual is
// resolved to 1e-10.
Eigen::VectorXd project(const Eigen::VectorXd& theta, const constraint_set& constraint);

}  // namespace drokit
