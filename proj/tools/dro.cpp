// Command-line front end. Subcommands mirror the library layers: eval (inner
// worst case), fit (outer minimization), select (hyperparameters), simulate /
// rates / coverage (experiment runners). Every CSV output gets a manifest
// written beside it; identical manifests give bit-identical outputs.

#include <CLI11.hpp>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "drokit/divergence.hpp"
#include "drokit/errors.hpp"
#include "drokit/experiments.hpp"
#include "drokit/inference.hpp"
#include "drokit/io.hpp"
#include "drokit/losses.hpp"
#include "drokit/oracle.hpp"
#include "drokit/robust_risk.hpp"
#include "drokit/selection.hpp"
#include "drokit/solvers.hpp"

namespace {

using namespace drokit;

// Stdout display rounds to 15 significant digits: the inner solvers carry a
// couple of ulps of arithmetic noise, and files keep full precision anyway.
std::string display(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.15g", x);
  return buf;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = text.find(',', pos);
    const std::string cell =
        text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    try {
      std::size_t used = 0;
      out.push_back(std::stod(cell, &used));
      if (used != cell.size()) throw std::invalid_argument(cell);
    } catch (const std::exception&) {
      throw invalid_spec(what + ": expected a comma-separated list of numbers, got '" + text +
                         "'");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) throw invalid_spec(what + ": empty list");
  return out;
}

loss_kind parse_loss_kind(const std::string& name) {
  if (name == "squared") return loss_kind::squared;
  if (name == "absolute") return loss_kind::absolute;
  if (name == "hinge") return loss_kind::hinge;
  if (name == "logistic") return loss_kind::binary_logistic;
  if (name == "linear") return loss_kind::linear;
  throw invalid_spec("unknown loss kind '" + name +
                     "' (squared|absolute|hinge|logistic|linear)");
}

constraint_set parse_constraint(const std::string& text) {
  if (text.empty()) return constraint_set::unconstrained();
  const std::vector<double> parts = parse_double_list(text, "--constraint");
  if (parts.size() != 3) throw invalid_spec("--constraint: expected a1,a2,r");
  return constraint_set::norm_ball(parts[0], parts[1], parts[2]);
}

Eigen::VectorXd to_vector(const std::vector<double>& values) {
  return Eigen::Map<const Eigen::VectorXd>(values.data(),
                                           static_cast<std::ptrdiff_t>(values.size()));
}

// Options shared by the model-fitting subcommands.
struct common_options {
  std::string data_path;
  std::string loss = "squared";
  double k = 2.0;
  double rho = 0.0;
  double alpha = -1.0;  // <0 means Cressie-Read family
  std::string constraint;
  std::string out;
  std::uint64_t seed = 20240915;
  int max_iter = 5000;
  double grad_tol = 1e-8;
  double init_step = 1.0;

  divergence_spec spec() const {
    return alpha >= 0.0 ? divergence_spec::cvar(alpha) : divergence_spec::cressie_read(k, rho);
  }
  fit_config fit() const {
    fit_config config;
    config.max_iter = max_iter;
    config.grad_tol = grad_tol;
    config.init_step = init_step;
    config.seed = seed;
    return config;
  }
  void manifest_entries(std::vector<std::pair<std::string, std::string>>& entries) const {
    entries.emplace_back("loss", loss);
    entries.emplace_back("k", format_double(k));
    entries.emplace_back("rho", format_double(rho));
    entries.emplace_back("alpha", format_double(alpha));
    entries.emplace_back("constraint", constraint.empty() ? "none" : constraint);
    entries.emplace_back("seed", std::to_string(seed));
    entries.emplace_back("max_iter", std::to_string(max_iter));
    entries.emplace_back("grad_tol", format_double(grad_tol));
    entries.emplace_back("init_step", format_double(init_step));
  }
};

void write_output(const std::string& out, const std::vector<result_row>& rows,
                  std::vector<std::pair<std::string, std::string>> entries) {
  write_results_csv(out, rows);
  write_manifest(out + ".manifest", std::move(entries));
}

void append_theta(std::vector<result_row>& rows, const std::string& method,
                  const Eigen::VectorXd& theta) {
  for (int j = 0; j < theta.size(); ++j)
    rows.push_back({method, "theta" + std::to_string(j + 1), theta(j)});
}

int run_eval(const common_options& opts, const std::string& losses_path,
             const std::string& theta_text) {
  worst_case wc;
  if (!losses_path.empty()) {
    const Eigen::VectorXd losses = read_loss_csv(losses_path);
    const Eigen::VectorXd uniform =
        Eigen::VectorXd::Constant(losses.size(), 1.0 / static_cast<double>(losses.size()));
    wc = robust_risk(losses, uniform, opts.spec());
  } else if (!opts.data_path.empty()) {
    if (theta_text.empty()) throw invalid_spec("eval: --theta is required with --data");
    const dataset data = read_dataset_csv(opts.data_path);
    const auto model = loss_model::make(parse_loss_kind(opts.loss), data.dim());
    const Eigen::VectorXd theta = to_vector(parse_double_list(theta_text, "--theta"));
    if (theta.size() != data.dim()) throw dimension_mismatch("eval: --theta size must match d");
    wc = robust_risk(loss_values(model, theta, data), data.base_weights, opts.spec());
  } else {
    throw invalid_spec("eval: pass --losses or --data with --theta");
  }
  if (!std::isfinite(wc.risk))
    throw non_finite_objective("eval: the robust risk overflowed");

  std::cout << display(wc.risk) << "\n";
  if (!opts.out.empty()) {
    std::vector<result_row> rows;
    rows.push_back({"eval", "risk", wc.risk});
    rows.push_back({"eval", "eta_star", wc.eta_star});
    rows.push_back({"eval", "lambda_star", wc.lambda_star});
    rows.push_back({"eval", "saturated", wc.saturated ? 1.0 : 0.0});
    std::vector<std::pair<std::string, std::string>> entries;
    entries.emplace_back("command", "eval");
    entries.emplace_back("losses", losses_path.empty() ? "none" : losses_path);
    entries.emplace_back("data", opts.data_path.empty() ? "none" : opts.data_path);
    entries.emplace_back("theta", theta_text.empty() ? "none" : theta_text);
    opts.manifest_entries(entries);
    write_output(opts.out, rows, std::move(entries));
  }
  return 0;
}

int run_fit(const common_options& opts) {
  const dataset data = read_dataset_csv(opts.data_path);
  const auto model = loss_model::make(parse_loss_kind(opts.loss), data.dim());
  const constraint_set ball = parse_constraint(opts.constraint);

  const bool robust = opts.alpha >= 0.0 || opts.rho > 0.0;
  const std::string method = robust ? "dro" : "erm";
  const fit_result fit = robust ? fit_dro(model, data, opts.spec(), ball, opts.fit())
                                : fit_erm(model, data, ball, opts.fit());
  if (!std::isfinite(fit.objective))
    throw non_finite_objective("fit: the objective overflowed");

  std::cout << "objective " << display(fit.objective) << " converged "
            << (fit.converged ? 1 : 0) << " iterations " << fit.iterations << "\n";
  std::vector<result_row> rows;
  rows.push_back({method, "objective", fit.objective});
  rows.push_back({method, "converged", fit.converged ? 1.0 : 0.0});
  rows.push_back({method, "iterations", static_cast<double>(fit.iterations)});
  append_theta(rows, method, fit.theta);
  std::vector<std::pair<std::string, std::string>> entries;
  entries.emplace_back("command", "fit");
  entries.emplace_back("data", opts.data_path);
  opts.manifest_entries(entries);
  write_output(opts.out, rows, std::move(entries));
  return 0;
}

int run_select(const common_options& opts, const std::string& method, const std::string& aux_path,
               const std::string& k_grid_text, const std::string& rho_grid_text, int slices,
               double train_fraction) {
  const dataset data = read_dataset_csv(opts.data_path);
  const auto model = loss_model::make(parse_loss_kind(opts.loss), data.dim());
  const constraint_set ball = parse_constraint(opts.constraint);
  selection_grid grid;
  grid.k_values = parse_double_list(k_grid_text, "--k-grid");
  grid.rho_values = parse_double_list(rho_grid_text, "--rho-grid");

  selection_report report;
  if (method == "ysplit") {
    report = ysplit_select(model, data, grid, ball, opts.fit(), slices, train_fraction, opts.seed);
  } else if (method == "aux") {
    if (aux_path.empty()) throw invalid_spec("select: --aux is required with --method aux");
    const dataset aux = read_dataset_csv(aux_path);
    report = auxiliary_select(model, data, aux, grid, ball, opts.fit());
  } else {
    throw invalid_spec("select: --method must be ysplit or aux");
  }

  std::cout << "chosen k " << display(report.chosen_k) << " rho "
            << display(report.chosen_rho) << "\n";
  std::vector<result_row> rows;
  rows.push_back({method, "chosen_k", report.chosen_k});
  rows.push_back({method, "chosen_rho", report.chosen_rho});
  for (const auto& entry : report.score_table)
    rows.push_back({method, "score_k" + format_double(entry.k) + "_rho" + format_double(entry.rho),
                    entry.score});
  append_theta(rows, method, report.final_theta);
  std::vector<std::pair<std::string, std::string>> entries;
  entries.emplace_back("command", "select");
  entries.emplace_back("method", method);
  entries.emplace_back("data", opts.data_path);
  entries.emplace_back("aux", aux_path.empty() ? "none" : aux_path);
  entries.emplace_back("k_grid", k_grid_text);
  entries.emplace_back("rho_grid", rho_grid_text);
  entries.emplace_back("slices", std::to_string(slices));
  entries.emplace_back("train_fraction", format_double(train_fraction));
  opts.manifest_entries(entries);
  write_output(opts.out, rows, std::move(entries));
  return 0;
}

experiment_config make_experiment_config(const std::string& experiment, std::uint64_t seed,
                                         std::ptrdiff_t n_train, std::ptrdiff_t n_test,
                                         int replications, const std::string& k_grid_text,
                                         const std::string& rho_grid_text,
                                         const std::string& out) {
  experiment_config config;
  config.experiment = experiment;
  config.seed = seed;
  config.n_train = n_train;
  config.n_test = n_test;
  config.replications = replications;
  if (!k_grid_text.empty()) config.grid.k_values = parse_double_list(k_grid_text, "--k-grid");
  if (!rho_grid_text.empty())
    config.grid.rho_values = parse_double_list(rho_grid_text, "--rho-grid");
  config.output_path = out;
  return config;
}

std::vector<result_row> simulate_rows(const experiment_config& config) {
  std::vector<result_row> rows;
  if (config.experiment == "shift") {
    const shift_report report = run_shift_experiment(config);
    for (const auto& m : report.methods) {
      rows.push_back({m.name, "median_loss_s0", m.median_loss_s0});
      rows.push_back({m.name, "median_loss_spi", m.median_loss_spi});
    }
  } else if (config.experiment == "tail") {
    const tail_report report = run_tail_experiment(config);
    for (std::size_t j = 0; j < report.rho_values.size(); ++j) {
      const std::string name =
          "dro_k" + format_double(report.k) + "_rho" + format_double(report.rho_values[j]);
      rows.push_back({name, "median_minority_q90", report.median_minority_q90[j]});
      rows.push_back({name, "median_mean_loss", report.median_mean_loss[j]});
    }
  } else if (config.experiment == "two_group" || config.experiment == "infinite_group") {
    const subpopulation_report report = config.experiment == "two_group"
                                            ? run_two_group_experiment(config)
                                            : run_infinite_group_experiment(config);
    rows.push_back({"selected", "median_minority_loss", report.median_selected_minority});
    rows.push_back({"selected", "median_mean_loss", report.median_selected_mean});
    rows.push_back({"erm", "median_minority_loss", report.median_erm_minority});
    rows.push_back({"erm", "median_mean_loss", report.median_erm_mean});
    for (std::size_t r = 0; r < report.chosen_k.size(); ++r) {
      rows.push_back({"selected", "chosen_k_rep" + std::to_string(r), report.chosen_k[r]});
      rows.push_back({"selected", "chosen_rho_rep" + std::to_string(r), report.chosen_rho[r]});
    }
  } else if (config.experiment == "mean_limit") {
    const mean_limit_report report = run_mean_limit_experiment(config);
    for (std::size_t a = 0; a < report.alphas.size(); ++a) {
      const std::string name = "cvar_alpha" + format_double(report.alphas[a]);
      rows.push_back({name, "theta1", report.minimizers[a](0)});
      rows.push_back({name, "theta2", report.minimizers[a](1)});
      rows.push_back({name, "distance_to_mean", report.distance_to_mean[a]});
      rows.push_back({name, "distance_to_chebyshev", report.distance_to_chebyshev[a]});
    }
    rows.push_back({"reference", "weighted_mean1", report.weighted_mean(0)});
    rows.push_back({"reference", "weighted_mean2", report.weighted_mean(1)});
    rows.push_back({"reference", "chebyshev1", report.chebyshev(0)});
    rows.push_back({"reference", "chebyshev2", report.chebyshev(1)});
  } else if (config.experiment == "regression_limit") {
    const regression_limit_report report = run_regression_limit_experiment(config);
    append_theta(rows, "cvar", report.theta_cvar);
    append_theta(rows, "maximin", report.theta_maximin);
    rows.push_back({"compare", "distance", report.distance});
    rows.push_back({"compare", "alpha", report.alpha});
  } else {
    throw invalid_spec("simulate: unknown experiment '" + config.experiment + "'");
  }
  return rows;
}

int run_simulate(const experiment_config& config) {
  const std::vector<result_row> rows = simulate_rows(config);
  std::cout << "wrote " << rows.size() << " rows\n";
  std::vector<std::pair<std::string, std::string>> entries;
  entries.emplace_back("command", "simulate");
  entries.emplace_back("experiment", config.experiment);
  entries.emplace_back("seed", std::to_string(config.seed));
  entries.emplace_back("n_train", std::to_string(config.n_train));
  entries.emplace_back("n_test", std::to_string(config.n_test));
  entries.emplace_back("replications", std::to_string(config.replications));
  write_output(config.output_path, rows, std::move(entries));
  return 0;
}

int run_rates(const experiment_config& config) {
  const std::vector<rate_report> reports = run_rate_experiment(config);
  std::vector<result_row> rows;
  for (const rate_report& report : reports) {
    const std::string name = "rates_k" + format_double(report.k);
    for (std::size_t j = 0; j < report.n_values.size(); ++j)
      rows.push_back(
          {name, "median_err_n" + format_double(report.n_values[j]), report.median_abs_errors[j]});
    rows.push_back({name, "slope", report.fitted_slope});
    std::cout << name << " slope " << display(report.fitted_slope) << "\n";
  }
  std::vector<std::pair<std::string, std::string>> entries;
  entries.emplace_back("command", "rates");
  entries.emplace_back("seed", std::to_string(config.seed));
  entries.emplace_back("replications", std::to_string(config.replications));
  // Population protocol: two atoms {0, 1} under loss theta*z with theta = 1,
  // rare-atom mass pinned at 0.2/n per sample size (the hard-instance scaling
  // behind the slow-rate regime), default radius rho = 1.
  entries.emplace_back("population", "two_point_0_1");
  entries.emplace_back("rare_draws_per_sample", "0.2");
  entries.emplace_back("theta", "1");
  entries.emplace_back(
      "rho", format_double(config.grid.rho_values.empty() ? 1.0 : config.grid.rho_values.front()));
  write_output(config.output_path, rows, std::move(entries));
  return 0;
}

int run_coverage(const experiment_config& config) {
  const coverage_report report = run_coverage_experiment(config);
  std::cout << "coverage " << display(report.coverage) << "\n";
  std::vector<result_row> rows;
  rows.push_back({"coverage", "coverage", report.coverage});
  rows.push_back({"coverage", "theta_star", report.theta_star});
  rows.push_back({"coverage", "mean_ci_width", report.mean_ci_width});
  rows.push_back({"coverage", "replications", static_cast<double>(report.replications)});
  std::vector<std::pair<std::string, std::string>> entries;
  entries.emplace_back("command", "coverage");
  entries.emplace_back("seed", std::to_string(config.seed));
  entries.emplace_back("n_train", std::to_string(config.n_train));
  entries.emplace_back("replications", std::to_string(config.replications));
  write_output(config.output_path, rows, std::move(entries));
  return 0;
}

// Flat key=value config: keys are the subcommand's long option names without
// the leading dashes. Flags given on the command line win over the file.
// Applied inside the subcommand callback, after CLI11 has assigned flag
// values but before any work runs.
void apply_config(CLI::App* sub, const std::string& path) {
  if (path.empty()) return;
  std::ifstream in(path);
  if (!in) throw schema_mismatch("config: cannot open '" + path + "'");
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw schema_mismatch("config: line " + std::to_string(line_no) + " is not key=value");
    const auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    CLI::Option* op = sub->get_option_no_throw("--" + key);
    if (op == nullptr || key == "config")
      throw schema_mismatch("config: unknown key '" + key + "'");
    if (op->count() > 0) continue;
    op->add_result(value);
    op->run_callback();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"distributionally robust optimization over f-divergence balls"};
  app.require_subcommand(1);

  common_options opts;
  std::string config_path;
  std::string losses_path, theta_text;
  std::string select_method = "ysplit", aux_path;
  std::string k_grid_text, rho_grid_text;
  int slices = 5;
  double train_fraction = 0.8;
  std::string experiment;
  std::int64_t n_train = 0, n_test = 20000;
  int replications = 0;

  const auto add_common = [&](CLI::App* sub, bool with_fit_knobs) {
    sub->add_option("--k", opts.k, "Cressie-Read index (> 1)");
    sub->add_option("--rho", opts.rho, "divergence ball radius (>= 0)");
    sub->add_option("--alpha", opts.alpha, "CVaR level in (0, 1]; selects the CVaR family");
    sub->add_option("--seed", opts.seed, "random seed");
    if (with_fit_knobs) {
      sub->add_option("--loss", opts.loss, "squared|absolute|hinge|logistic|linear");
      sub->add_option("--constraint", opts.constraint, "norm ball a1,a2,r");
      sub->add_option("--max-iter", opts.max_iter, "iteration cap");
      sub->add_option("--grad-tol", opts.grad_tol, "gradient-mapping tolerance");
      sub->add_option("--init-step", opts.init_step, "initial line-search step");
    }
    sub->add_option("--config", config_path, "flat key=value config file");
  };

  CLI::App* eval = app.add_subcommand("eval", "robust risk of losses or of a model at theta");
  eval->add_option("--losses", losses_path, "CSV with a single 'loss' column");
  eval->add_option("--data", opts.data_path, "dataset CSV (x1..xd,y[,group])");
  eval->add_option("--theta", theta_text, "comma-separated parameter vector");
  eval->add_option("--out", opts.out, "results CSV path");
  add_common(eval, true);
  eval->callback([&] {
    apply_config(eval, config_path);
    run_eval(opts, losses_path, theta_text);
  });

  CLI::App* fit = app.add_subcommand("fit", "ERM or DRO model fit");
  fit->add_option("--data", opts.data_path, "dataset CSV")->required();
  fit->add_option("--out", opts.out, "results CSV path")->required();
  add_common(fit, true);
  fit->callback([&] {
    apply_config(fit, config_path);
    run_fit(opts);
  });

  CLI::App* select = app.add_subcommand("select", "hyperparameter selection");
  select->add_option("--data", opts.data_path, "dataset CSV")->required();
  select->add_option("--method", select_method, "ysplit|aux");
  select->add_option("--aux", aux_path, "auxiliary dataset CSV (aux method)");
  select->add_option("--k-grid", k_grid_text, "comma-separated k grid")->required();
  select->add_option("--rho-grid", rho_grid_text, "comma-separated rho grid")->required();
  select->add_option("--slices", slices, "number of target slices");
  select->add_option("--train-fraction", train_fraction, "per-slice train fraction");
  select->add_option("--out", opts.out, "results CSV path")->required();
  add_common(select, true);
  select->callback([&] {
    apply_config(select, config_path);
    run_select(opts, select_method, aux_path, k_grid_text, rho_grid_text, slices, train_fraction);
  });

  const auto add_experiment_flags = [&](CLI::App* sub) {
    sub->add_option("--seed", opts.seed, "random seed");
    sub->add_option("--n-train", n_train, "training sample size");
    sub->add_option("--n-test", n_test, "test sample size");
    sub->add_option("--replications", replications, "replication count");
    sub->add_option("--k-grid", k_grid_text, "comma-separated k grid");
    sub->add_option("--rho-grid", rho_grid_text, "comma-separated rho grid");
    sub->add_option("--out", opts.out, "results CSV path")->required();
    sub->add_option("--config", config_path, "flat key=value config file");
  };

  CLI::App* simulate = app.add_subcommand("simulate", "run a synthetic experiment");
  simulate
      ->add_option("--experiment", experiment,
                   "shift|tail|two_group|infinite_group|mean_limit|regression_limit")
      ->required();
  add_experiment_flags(simulate);
  simulate->callback([&] {
    apply_config(simulate, config_path);
    run_simulate(make_experiment_config(experiment, opts.seed, n_train, n_test, replications,
                                        k_grid_text, rho_grid_text, opts.out));
  });

  CLI::App* rates = app.add_subcommand("rates", "empirical convergence-rate probe");
  add_experiment_flags(rates);
  rates->callback([&] {
    apply_config(rates, config_path);
    run_rates(make_experiment_config("rates", opts.seed, n_train, n_test, replications,
                                     k_grid_text, rho_grid_text, opts.out));
  });

  CLI::App* coverage = app.add_subcommand("coverage", "confidence-interval coverage probe");
  add_experiment_flags(coverage);
  coverage->callback([&] {
    apply_config(coverage, config_path);
    run_coverage(make_experiment_config("coverage", opts.seed, n_train, n_test, replications,
                                        k_grid_text, rho_grid_text, opts.out));
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  } catch (const drokit::validation_error& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const drokit::numerical_error& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
