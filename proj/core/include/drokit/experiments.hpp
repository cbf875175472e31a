#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "drokit/selection.hpp"

namespace drokit {

// Shared knobs for the simulation runners. Zero/empty fields fall back to
// each experiment's protocol defaults (noted per runner).
struct experiment_config {
  std::string experiment;  // shift|tail|two_group|infinite_group|rates|coverage|mean_limit|regression_limit
  std::uint64_t seed = 20240915;
  std::ptrdiff_t n_train = 0;
  std::ptrdiff_t n_test = 20000;
  int replications = 0;
  selection_grid grid;
  std::string output_path;
};

struct rate_report {
  double k = 0.0;
  std::vector<double> n_values;
  std::vector<double> median_abs_errors;
  double fitted_slope = 0.0;
};

// Linear loss theta * z at theta = 1 on the two-atom population
// Z in {0, 1}, P(Z = 1) = 0.05. For each n in {1e2, 1e3, 1e4, 1e5} draws
// `replications` samples (default 200), measures |risk(empirical) -
// risk(population)| with the population risk in closed form on the two
// atoms, and fits the log-log slope of the medians. One report per k in
// grid.k_values (default {2, 1.2}); rho from grid.rho_values (default 1).
std::vector<rate_report> run_rate_experiment(const experiment_config& config);

struct shift_report {
  struct method_row {
    std::string name;
    double k = 0.0;    // 0 marks ERM
    double rho = 0.0;
    double median_loss_s0 = 0.0;
    double median_loss_spi = 0.0;
  };
  std::vector<method_row> methods;
};

// Hinge-loss classification under rotation of the true separator: trains
// ERM and robust models (default k in {1.5, 2, 4}, rho = 0.5) on n_train =
// 100 rows, evaluates mean test hinge loss at s = 0 and s = pi (same test
// features), medians over replications (default 20) seeds.
shift_report run_shift_experiment(const experiment_config& config);

struct tail_report {
  double k = 0.0;
  std::vector<double> rho_values;
  std::vector<double> median_minority_q90;
  std::vector<double> median_mean_loss;
};

// Squared-loss regression on the thresholded design (n_train = 2000),
// k = 2, rho over {.001, .01, .1, .5, 4.5}: per rho the median (over seeds)
// 90%-quantile loss on minority test rows (x1 > 1.645) and the median mean
// test loss. Same train/test draws across rho within a seed.
tail_report run_tail_experiment(const experiment_config& config);

struct subpopulation_report {
  double median_selected_minority = 0.0;
  double median_erm_minority = 0.0;
  double median_selected_mean = 0.0;
  double median_erm_mean = 0.0;
  std::vector<double> chosen_k;    // per seed
  std::vector<double> chosen_rho;  // per seed
};

// Two-group design, n_train = 1000: YSplit-selected robust model vs ERM,
// scored by minority-group (g = 0) and overall mean test loss, medians over
// replications (default 20) seeds.
subpopulation_report run_two_group_experiment(const experiment_config& config);

// Infinite-group design, n_train = 1000: model selected on a 100-row
// auxiliary sample drawn at g = 0.5 vs ERM, scored on a g = 0 test set and
// on a test set from the training distribution.
subpopulation_report run_infinite_group_experiment(const experiment_config& config);

struct coverage_report {
  double theta_star = 0.0;
  double coverage = 0.0;
  double mean_ci_width = 0.0;
  int replications = 0;
};

// Well-specified d = 1 squared-loss Gaussian design (y = x + sd-1 noise),
// k = 2, rho = 0.5, n_train = 2000: the fraction of replications (default
// 500) whose 95% interval covers the robust minimizer computed once on a
// 10^6-row surrogate sample.
coverage_report run_coverage_experiment(const experiment_config& config);

struct mean_limit_report {
  std::vector<double> alphas;
  std::vector<Eigen::Vector2d> minimizers;
  Eigen::Vector2d weighted_mean = Eigen::Vector2d::Zero();
  Eigen::Vector2d chebyshev = Eigen::Vector2d::Zero();
  std::vector<double> distance_to_mean;
  std::vector<double> distance_to_chebyshev;
};

// CVaR_alpha minimization of 1/2 ||theta - z||^2 over n_train = 1e5 draws
// from three planar unit-circle atoms with weights (0.5, 0.3, 0.2), for
// alpha in {1, 0.3, 0.1, 0.03}. alpha = 1 approaches the weighted mean of
// the atoms; small alpha approaches their Chebyshev center.
mean_limit_report run_mean_limit_experiment(const experiment_config& config);

struct regression_limit_report {
  double alpha = 0.0;
  Eigen::VectorXd theta_cvar;
  Eigen::VectorXd theta_maximin;
  double distance = 0.0;
};

// CVaR regression at alpha = 0.03 on n_train = 1e5 rows of the two-group
// design, compared against maximin_oracle with the true group parameters
// injected.
regression_limit_report run_regression_limit_experiment(const experiment_config& config);

}  // namespace drokit
