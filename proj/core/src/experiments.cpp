#include "drokit/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <utility>

#include "drokit/errors.hpp"
#include "drokit/generators.hpp"
#include "drokit/inference.hpp"
#include "drokit/parallel.hpp"
#include "drokit/rng.hpp"
#include "drokit/robust_risk.hpp"
#include "drokit/solvers.hpp"
#include "drokit/stats.hpp"

namespace drokit {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Experiment fits need qualitative accuracy, not the library defaults.
fit_config experiment_fit_config(int max_iter, double grad_tol) {
  fit_config config;
  config.max_iter = max_iter;
  config.grad_tol = grad_tol;
  return config;
}

double mean_loss_on(const loss_model& model, const Eigen::VectorXd& theta, const dataset& data,
                    const std::vector<int>& rows) {
  const Eigen::VectorXd losses = loss_values(model, theta, data);
  if (rows.empty()) return losses.mean();
  double acc = 0.0;
  for (const int i : rows) acc += losses(i);
  return acc / static_cast<double>(rows.size());
}

}  // namespace

std::vector<rate_report> run_rate_experiment(const experiment_config& config) {
  const std::vector<double> ks =
      config.grid.k_values.empty() ? std::vector<double>{2.0, 1.2} : config.grid.k_values;
  const double rho = config.grid.rho_values.empty() ? 1.0 : config.grid.rho_values.front();
  const int replications = config.replications > 0 ? config.replications : 200;
  const std::vector<std::ptrdiff_t> n_values = {100, 1000, 10000, 100000};
  // A population with a fixed rare-atom mass keeps the plug-in error on the
  // parametric n^{-1/2} path for every k: the risk is a smooth function of
  // the atom frequency. The slow-rate regime lives on hard instances whose
  // rare mass shrinks with the budget, so the probe pins n * P(Z = 1) and
  // measures against the exact two-point risk at each n. Keeping the pinned
  // count below ln 2 means the typical sample never sees the rare atom, so
  // the median plug-in error is that atom's full risk contribution. This is
  // the cleanest read of the slow rate: the error atoms of the count
  // distribution are ~50% apart, so any larger pin leaves the median
  // straddling two atoms and the fitted slope jittering between them.
  constexpr double kExpectedRareDraws = 0.2;

  Eigen::Vector2d atoms(0.0, 1.0);

  std::vector<rate_report> reports;
  for (std::size_t ki = 0; ki < ks.size(); ++ki) {
    const double k = ks[ki];

    rate_report report;
    report.k = k;
    std::vector<double> log_n, log_med;
    for (std::size_t ni = 0; ni < n_values.size(); ++ni) {
      const std::ptrdiff_t n = n_values[ni];
      const double prob = kExpectedRareDraws / static_cast<double>(n);
      const double true_risk =
          robust_risk_cr(atoms, Eigen::Vector2d(1.0 - prob, prob), k, rho).risk;
      std::vector<double> errors(static_cast<std::size_t>(replications));
      const std::uint64_t cell = derive_seed(config.seed, 16 * ki + ni);
      parallel_for(replications, [&](int r) {
        rng_t rng(derive_seed(cell, static_cast<std::uint64_t>(r)));
        std::binomial_distribution<std::ptrdiff_t> binom(n, prob);
        const std::ptrdiff_t count = binom(rng);
        double estimate;
        if (count == 0) {
          estimate = 0.0;
        } else if (count == n) {
          estimate = 1.0;
        } else {
          const double phat = static_cast<double>(count) / static_cast<double>(n);
          estimate = robust_risk_cr(atoms, Eigen::Vector2d(1.0 - phat, phat), k, rho).risk;
        }
        errors[static_cast<std::size_t>(r)] = std::abs(estimate - true_risk);
      });
      const double med = median(errors);
      report.n_values.push_back(static_cast<double>(n));
      report.median_abs_errors.push_back(med);
      log_n.push_back(std::log(static_cast<double>(n)));
      // At default sizes the median is positive with overwhelming margin;
      // the floor only keeps tiny custom runs finite.
      log_med.push_back(std::log(std::max(med, 1e-300)));
    }
    report.fitted_slope = fitted_slope(log_n, log_med);
    reports.push_back(std::move(report));
  }
  return reports;
}

shift_report run_shift_experiment(const experiment_config& config) {
  const std::ptrdiff_t n_train = config.n_train > 0 ? config.n_train : 100;
  const std::ptrdiff_t n_test = config.n_test > 0 ? config.n_test : 20000;
  const int replications = config.replications > 0 ? config.replications : 20;
  const std::vector<double> ks =
      config.grid.k_values.empty() ? std::vector<double>{1.5, 2.0, 4.0} : config.grid.k_values;
  const double rho = config.grid.rho_values.empty() ? 0.5 : config.grid.rho_values.front();

  const auto model = loss_model::make(loss_kind::hinge, 5);
  const auto ball = constraint_set::norm_ball(0.0, 1.0, 10.0);
  const auto fitcfg = experiment_fit_config(2000, 1e-6);

  shift_report report;
  report.methods.push_back({"erm", 0.0, 0.0, 0.0, 0.0});
  for (const double k : ks) {
    shift_report::method_row row;
    row.name = "dro_k" + std::to_string(k) + "_rho" + std::to_string(rho);
    row.k = k;
    row.rho = rho;
    report.methods.push_back(row);
  }

  const std::size_t n_methods = report.methods.size();
  std::vector<std::vector<double>> loss_s0(n_methods), loss_spi(n_methods);
  for (auto& v : loss_s0) v.resize(static_cast<std::size_t>(replications));
  for (auto& v : loss_spi) v.resize(static_cast<std::size_t>(replications));

  parallel_for(replications, [&](int r) {
    // One pooled draw per replication: the rotation truth is seed-derived, so
    // train and test must come from the same stream. The first n_train rows
    // train; the rest are the shifted and unshifted test sets (the pi pool
    // shares the seed, hence the same X with negated labels).
    const std::uint64_t rep_seed = derive_seed(config.seed, 1000 + static_cast<std::uint64_t>(r));
    const auto pool0 = gen_classification_rotation(rep_seed, n_train + n_test, 0.0);
    const auto poolpi = gen_classification_rotation(rep_seed, n_train + n_test, kPi);

    std::vector<int> train_rows(static_cast<std::size_t>(n_train));
    for (std::ptrdiff_t i = 0; i < n_train; ++i) train_rows[static_cast<std::size_t>(i)] = static_cast<int>(i);
    std::vector<int> test_rows(static_cast<std::size_t>(n_test));
    for (std::ptrdiff_t i = 0; i < n_test; ++i)
      test_rows[static_cast<std::size_t>(i)] = static_cast<int>(n_train + i);
    const dataset train = pool0.data.subset(train_rows);

    for (std::size_t m = 0; m < n_methods; ++m) {
      Eigen::VectorXd theta;
      if (report.methods[m].k == 0.0) {
        theta = fit_erm(model, train, ball, fitcfg).theta;
      } else {
        const auto spec = divergence_spec::cressie_read(report.methods[m].k, report.methods[m].rho);
        theta = fit_dro(model, train, spec, ball, fitcfg).theta;
      }
      loss_s0[m][static_cast<std::size_t>(r)] = mean_loss_on(model, theta, pool0.data, test_rows);
      loss_spi[m][static_cast<std::size_t>(r)] = mean_loss_on(model, theta, poolpi.data, test_rows);
    }
  });

  for (std::size_t m = 0; m < n_methods; ++m) {
    report.methods[m].median_loss_s0 = median(loss_s0[m]);
    report.methods[m].median_loss_spi = median(loss_spi[m]);
  }
  return report;
}

tail_report run_tail_experiment(const experiment_config& config) {
  const std::ptrdiff_t n_train = config.n_train > 0 ? config.n_train : 2000;
  const std::ptrdiff_t n_test = config.n_test > 0 ? config.n_test : 20000;
  const int replications = config.replications > 0 ? config.replications : 20;
  const double k = config.grid.k_values.empty() ? 2.0 : config.grid.k_values.front();
  const std::vector<double> rhos = config.grid.rho_values.empty()
                                       ? std::vector<double>{0.001, 0.01, 0.1, 0.5, 4.5}
                                       : config.grid.rho_values;

  const auto model = loss_model::make(loss_kind::squared, 5);
  const auto ball = constraint_set::norm_ball(0.0, 1.0, 10.0);
  const auto fitcfg = experiment_fit_config(500, 1e-6);

  std::vector<std::vector<double>> q90(rhos.size()), mean_loss(rhos.size());
  for (auto& v : q90) v.resize(static_cast<std::size_t>(replications));
  for (auto& v : mean_loss) v.resize(static_cast<std::size_t>(replications));

  parallel_for(replications, [&](int r) {
    // Pooled draw: the regression truth is seed-derived, so train and test
    // share one stream (first n_train rows train, the rest test).
    const auto pool = gen_regression_threshold(
        derive_seed(config.seed, 1000 + static_cast<std::uint64_t>(r)), n_train + n_test);
    std::vector<int> train_rows(static_cast<std::size_t>(n_train));
    for (std::ptrdiff_t i = 0; i < n_train; ++i) train_rows[static_cast<std::size_t>(i)] = static_cast<int>(i);
    const dataset train = pool.data.subset(train_rows);
    std::vector<int> test_rows, minority;
    test_rows.reserve(static_cast<std::size_t>(n_test));
    for (std::ptrdiff_t i = n_train; i < n_train + n_test; ++i) {
      test_rows.push_back(static_cast<int>(i));
      if (pool.data.features(i, 0) > 1.645) minority.push_back(static_cast<int>(i));
    }

    for (std::size_t j = 0; j < rhos.size(); ++j) {
      const auto spec = divergence_spec::cressie_read(k, rhos[j]);
      const Eigen::VectorXd theta = fit_dro(model, train, spec, ball, fitcfg).theta;
      const Eigen::VectorXd losses = loss_values(model, theta, pool.data);
      std::vector<double> minority_losses;
      minority_losses.reserve(minority.size());
      for (const int i : minority) minority_losses.push_back(losses(i));
      q90[j][static_cast<std::size_t>(r)] = empirical_quantile(std::move(minority_losses), 0.9);
      double acc = 0.0;
      for (const int i : test_rows) acc += losses(i);
      mean_loss[j][static_cast<std::size_t>(r)] = acc / static_cast<double>(test_rows.size());
    }
  });

  tail_report report;
  report.k = k;
  report.rho_values = rhos;
  for (std::size_t j = 0; j < rhos.size(); ++j) {
    report.median_minority_q90.push_back(median(q90[j]));
    report.median_mean_loss.push_back(median(mean_loss[j]));
  }
  return report;
}

namespace {

selection_grid subpopulation_default_grid(const selection_grid& grid) {
  selection_grid out = grid;
  if (out.k_values.empty()) out.k_values = {1.5, 2.0, 4.0};
  if (out.rho_values.empty()) out.rho_values = {0.01, 0.1, 0.5, 4.5};
  return out;
}

subpopulation_report run_group_experiment(const experiment_config& config, bool infinite_groups) {
  const std::ptrdiff_t n_train = config.n_train > 0 ? config.n_train : 1000;
  const std::ptrdiff_t n_test = config.n_test > 0 ? config.n_test : 20000;
  const int replications = config.replications > 0 ? config.replications : 20;
  const selection_grid grid = subpopulation_default_grid(config.grid);

  const auto model = loss_model::make(loss_kind::squared, 2);
  const auto ball = constraint_set::norm_ball(0.0, 1.0, 10.0);
  const auto fitcfg = experiment_fit_config(400, 1e-6);

  subpopulation_report report;
  std::vector<double> sel_min(replications), erm_min(replications);
  std::vector<double> sel_mean(replications), erm_mean(replications);
  report.chosen_k.resize(static_cast<std::size_t>(replications));
  report.chosen_rho.resize(static_cast<std::size_t>(replications));

  parallel_for(replications, [&](int r) {
    const std::uint64_t train_seed = derive_seed(config.seed, 1000 + static_cast<std::uint64_t>(r));
    const std::uint64_t test_seed = derive_seed(config.seed, 5000 + static_cast<std::uint64_t>(r));

    selection_report selected;
    dataset train_data;
    if (infinite_groups) {
      const auto train = gen_infinite_group(train_seed, n_train);
      const auto aux = gen_infinite_group(
          derive_seed(config.seed, 7000 + static_cast<std::uint64_t>(r)), 100, 0.5);
      selected = auxiliary_select(model, train.data, aux.data, grid, ball, fitcfg);
      train_data = train.data;
    } else {
      const auto train = gen_two_group(train_seed, n_train);
      selected = ysplit_select(model, train.data, grid, ball, fitcfg, 5, 0.8,
                               derive_seed(config.seed, 3000 + static_cast<std::uint64_t>(r)));
      train_data = train.data;
    }
    const Eigen::VectorXd erm_theta = fit_erm(model, train_data, ball, fitcfg).theta;

    if (infinite_groups) {
      // Minority performance is measured on a g = 0 sample; the mean on a
      // fresh sample from the training distribution.
      const auto test_minority = gen_infinite_group(test_seed, n_test, 0.0);
      const auto test_natural = gen_infinite_group(
          derive_seed(config.seed, 9000 + static_cast<std::uint64_t>(r)), n_test);
      sel_min[r] = mean_loss_on(model, selected.final_theta, test_minority.data, {});
      erm_min[r] = mean_loss_on(model, erm_theta, test_minority.data, {});
      sel_mean[r] = mean_loss_on(model, selected.final_theta, test_natural.data, {});
      erm_mean[r] = mean_loss_on(model, erm_theta, test_natural.data, {});
    } else {
      const auto test = gen_two_group(test_seed, n_test);
      std::vector<int> minority;
      for (std::ptrdiff_t i = 0; i < n_test; ++i)
        if ((*test.data.groups)(i) == 0.0) minority.push_back(static_cast<int>(i));
      sel_min[r] = mean_loss_on(model, selected.final_theta, test.data, minority);
      erm_min[r] = mean_loss_on(model, erm_theta, test.data, minority);
      sel_mean[r] = mean_loss_on(model, selected.final_theta, test.data, {});
      erm_mean[r] = mean_loss_on(model, erm_theta, test.data, {});
    }
    report.chosen_k[static_cast<std::size_t>(r)] = selected.chosen_k;
    report.chosen_rho[static_cast<std::size_t>(r)] = selected.chosen_rho;
  });

  report.median_selected_minority = median(sel_min);
  report.median_erm_minority = median(erm_min);
  report.median_selected_mean = median(sel_mean);
  report.median_erm_mean = median(erm_mean);
  return report;
}

}  // namespace

subpopulation_report run_two_group_experiment(const experiment_config& config) {
  return run_group_experiment(config, false);
}

subpopulation_report run_infinite_group_experiment(const experiment_config& config) {
  return run_group_experiment(config, true);
}

namespace {

dataset coverage_sample(std::uint64_t seed, std::ptrdiff_t n) {
  rng_t rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXd y(n);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    x(i, 0) = normal(rng);
    y(i) = x(i, 0) + normal(rng);
  }
  return dataset::make(std::move(x), std::move(y));
}

}  // namespace

coverage_report run_coverage_experiment(const experiment_config& config) {
  const std::ptrdiff_t n = config.n_train > 0 ? config.n_train : 2000;
  const int replications = config.replications > 0 ? config.replications : 500;
  constexpr double kIndex = 2.0, kRadius = 0.5, kLevel = 0.95;
  const auto model = loss_model::make(loss_kind::squared, 1);
  const auto spec = divergence_spec::cressie_read(kIndex, kRadius);

  // Population surrogate: the robust minimizer on a 10^6-row sample.
  const dataset surrogate = coverage_sample(derive_seed(config.seed, 1), 1000000);
  const double theta_star =
      fit_dro(model, surrogate, spec, constraint_set::unconstrained(),
              experiment_fit_config(200, 1e-9))
          .theta(0);

  std::vector<int> covered(static_cast<std::size_t>(replications));
  std::vector<double> widths(static_cast<std::size_t>(replications));
  parallel_for(replications, [&](int r) {
    const dataset data =
        coverage_sample(derive_seed(config.seed, 100 + static_cast<std::uint64_t>(r)), n);
    fit_config fitcfg;
    const auto fit = fit_joint_dual(model, data, kIndex, kRadius, fitcfg);
    const auto inference =
        confidence_intervals(model, data, kIndex, kRadius, fit.theta, fit.lambda, fit.eta, kLevel);
    const auto [lo, hi] = inference.intervals.front();
    covered[static_cast<std::size_t>(r)] = (lo <= theta_star && theta_star <= hi) ? 1 : 0;
    widths[static_cast<std::size_t>(r)] = hi - lo;
  });

  coverage_report report;
  report.theta_star = theta_star;
  report.replications = replications;
  int hits = 0;
  double width_acc = 0.0;
  for (int r = 0; r < replications; ++r) {
    hits += covered[static_cast<std::size_t>(r)];
    width_acc += widths[static_cast<std::size_t>(r)];
  }
  report.coverage = static_cast<double>(hits) / static_cast<double>(replications);
  report.mean_ci_width = width_acc / static_cast<double>(replications);
  return report;
}

namespace {

// Minimizes CVaR_alpha of 1/2 ||theta - z||^2 over weighted atoms by the
// running-average iteration theta <- theta + (sum_i w_i z_i - theta)/(t+1),
// the strongly-convex step schedule for unit-curvature pieces.
Eigen::Vector2d cvar_mean_minimizer(const Eigen::MatrixXd& atoms, const Eigen::VectorXd& masses,
                                    double alpha) {
  const auto spec = divergence_spec::cvar(alpha);
  const std::ptrdiff_t m = atoms.rows();
  const auto objective_weights = [&](const Eigen::Vector2d& theta) {
    Eigen::VectorXd losses(m);
    for (std::ptrdiff_t v = 0; v < m; ++v)
      losses(v) = 0.5 * (theta - atoms.row(v).transpose()).squaredNorm();
    return robust_risk(losses, masses, spec);
  };

  Eigen::Vector2d theta = atoms.transpose() * masses;
  Eigen::Vector2d best_theta = theta;
  double best_value = objective_weights(theta).risk;
  constexpr int kIters = 200000;
  for (int t = 0; t < kIters; ++t) {
    const auto wc = objective_weights(theta);
    if (wc.risk < best_value) {
      best_value = wc.risk;
      best_theta = theta;
    }
    const Eigen::Vector2d target = atoms.transpose() * wc.weights;
    theta += (target - theta) / (static_cast<double>(t) + 1.0);
  }
  if (objective_weights(theta).risk < best_value) best_theta = theta;
  return best_theta;
}

}  // namespace

mean_limit_report run_mean_limit_experiment(const experiment_config& config) {
  const std::ptrdiff_t n = config.n_train > 0 ? config.n_train : 100000;

  Eigen::MatrixXd atoms(3, 2);
  for (int v = 0; v < 3; ++v) {
    const double angle = 0.3 + 2.0 * kPi * v / 3.0;
    atoms(v, 0) = std::cos(angle);
    atoms(v, 1) = std::sin(angle);
  }
  const Eigen::Vector3d population(0.5, 0.3, 0.2);

  // Multinomial counts via per-draw inverse CDF (keeps the draw sequence
  // portable, unlike std::discrete_distribution).
  rng_t rng(derive_seed(config.seed, 21));
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Eigen::Vector3d counts = Eigen::Vector3d::Zero();
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double u = uniform(rng);
    const int v = u < population(0) ? 0 : (u < population(0) + population(1) ? 1 : 2);
    counts(v) += 1.0;
  }
  if (counts.minCoeff() <= 0.0)
    throw numerical_failure("mean_limit: an atom received no draws; increase n");
  const Eigen::VectorXd masses = counts / static_cast<double>(n);

  mean_limit_report report;
  report.alphas = {1.0, 0.3, 0.1, 0.03};
  report.weighted_mean = atoms.transpose() * population;
  report.chebyshev = chebyshev_center(atoms);
  for (const double alpha : report.alphas) {
    const Eigen::Vector2d theta = cvar_mean_minimizer(atoms, masses, alpha);
    report.minimizers.push_back(theta);
    report.distance_to_mean.push_back((theta - report.weighted_mean).norm());
    report.distance_to_chebyshev.push_back((theta - report.chebyshev).norm());
  }
  return report;
}

regression_limit_report run_regression_limit_experiment(const experiment_config& config) {
  const std::ptrdiff_t n = config.n_train > 0 ? config.n_train : 100000;
  constexpr double kAlpha = 0.03;

  const auto sample = gen_two_group(derive_seed(config.seed, 31), n);
  const auto model = loss_model::make(loss_kind::squared, 2);
  const auto ball = constraint_set::norm_ball(0.0, 1.0, 10.0);

  regression_limit_report report;
  report.alpha = kAlpha;
  report.theta_cvar = fit_dro(model, sample.data, divergence_spec::cvar(kAlpha), ball,
                              experiment_fit_config(600, 1e-7))
                          .theta;

  maximin_options options;
  options.injected_group_params = std::vector<std::pair<double, Eigen::VectorXd>>{
      {0.0, sample.theta_group0}, {1.0, sample.theta_group1}};
  report.theta_maximin = maximin_oracle(sample.data, options);
  report.distance = (report.theta_cvar - report.theta_maximin).norm();
  return report;
}

}  // namespace drokit
