#include "drokit/selection.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <utility>

#include "drokit/divergence.hpp"
#include "drokit/errors.hpp"
#include "drokit/rng.hpp"

namespace drokit {

namespace {

void validate_grid(const selection_grid& grid) {
  if (grid.k_values.empty() || grid.rho_values.empty())
    throw empty_input("selection: grid must have at least one k and one rho");
  for (const double k : grid.k_values)
    if (!(k > 1.0) || !std::isfinite(k)) throw invalid_spec("selection: k values must exceed 1");
  for (const double rho : grid.rho_values)
    if (!(rho >= 0.0) || !std::isfinite(rho))
      throw invalid_spec("selection: rho values must be nonnegative");
}

}  // namespace

selection_report ysplit_select(const loss_model& model, const dataset& data,
                               const selection_grid& grid, const constraint_set& constraint,
                               const fit_config& config, int num_slices, double train_fraction,
                               std::uint64_t seed) {
  validate_grid(grid);
  if (model.kind == loss_kind::hinge || model.kind == loss_kind::binary_logistic)
    throw unsupported_loss("ysplit_select: requires real-valued targets");
  if (num_slices < 1) throw invalid_spec("ysplit_select: num_slices must be >= 1");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw invalid_spec("ysplit_select: train_fraction must lie in (0, 1)");
  const std::ptrdiff_t n = data.features.rows();
  if (n < num_slices) throw too_few_rows("ysplit_select: fewer rows than slices");

  // Sort by target descending, ties broken by original index.
  std::vector<std::ptrdiff_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::ptrdiff_t a, std::ptrdiff_t b) {
    if (data.targets(a) != data.targets(b)) return data.targets(a) > data.targets(b);
    return a < b;
  });

  selection_report report;
  report.group_of_row.assign(static_cast<std::size_t>(n), -1);
  report.validation_mask.assign(static_cast<std::size_t>(n), false);

  const std::ptrdiff_t base = n / num_slices;
  std::vector<int> train_rows;
  std::vector<std::vector<std::ptrdiff_t>> validation_rows(static_cast<std::size_t>(num_slices));
  std::ptrdiff_t pos = 0;
  for (int g = 0; g < num_slices; ++g) {
    const std::ptrdiff_t size = (g == num_slices - 1) ? n - pos : base;
    std::vector<std::ptrdiff_t> slice(order.begin() + pos, order.begin() + pos + size);
    pos += size;
    for (const std::ptrdiff_t row : slice) report.group_of_row[static_cast<std::size_t>(row)] = g;

    rng_t rng(derive_seed(seed, 1000 + static_cast<std::uint64_t>(g)));
    std::shuffle(slice.begin(), slice.end(), rng);
    const auto n_train =
        static_cast<std::ptrdiff_t>(std::floor(train_fraction * static_cast<double>(size)));
    for (std::ptrdiff_t i = 0; i < size; ++i) {
      if (i < n_train) {
        train_rows.push_back(static_cast<int>(slice[static_cast<std::size_t>(i)]));
      } else {
        const std::ptrdiff_t row = slice[static_cast<std::size_t>(i)];
        validation_rows[static_cast<std::size_t>(g)].push_back(row);
        report.validation_mask[static_cast<std::size_t>(row)] = true;
      }
    }
  }
  if (train_rows.empty()) throw too_few_rows("ysplit_select: no training rows after splitting");
  std::sort(train_rows.begin(), train_rows.end());
  const dataset train_data = data.subset(train_rows);

  double best_score = std::numeric_limits<double>::infinity();
  for (const double k : grid.k_values) {
    for (const double rho : grid.rho_values) {
      const auto spec = divergence_spec::cressie_read(k, rho);
      const fit_result fit = fit_dro(model, train_data, spec, constraint, config);
      const Eigen::VectorXd losses = loss_values(model, fit.theta, data);

      double worst = -std::numeric_limits<double>::infinity();
      for (const auto& rows : validation_rows) {
        if (rows.empty()) continue;
        double mass = 0.0, acc = 0.0;
        for (const std::ptrdiff_t row : rows) {
          mass += data.base_weights(row);
          acc += data.base_weights(row) * losses(row);
        }
        worst = std::max(worst, acc / mass);
      }
      report.score_table.push_back({k, rho, worst});
      if (worst < best_score) {
        best_score = worst;
        report.chosen_k = k;
        report.chosen_rho = rho;
      }
    }
  }

  const auto chosen = divergence_spec::cressie_read(report.chosen_k, report.chosen_rho);
  report.final_theta = fit_dro(model, data, chosen, constraint, config).theta;
  return report;
}

selection_report auxiliary_select(const loss_model& model, const dataset& train,
                                  const dataset& auxiliary, const selection_grid& grid,
                                  const constraint_set& constraint, const fit_config& config) {
  validate_grid(grid);
  if (auxiliary.features.cols() != train.features.cols())
    throw schema_mismatch("auxiliary_select: feature widths differ");

  selection_report report;
  double best_score = std::numeric_limits<double>::infinity();
  for (const double k : grid.k_values) {
    for (const double rho : grid.rho_values) {
      const auto spec = divergence_spec::cressie_read(k, rho);
      const fit_result fit = fit_dro(model, train, spec, constraint, config);
      const double score =
          auxiliary.base_weights.dot(loss_values(model, fit.theta, auxiliary));
      report.score_table.push_back({k, rho, score});
      if (score < best_score) {
        best_score = score;
        report.chosen_k = k;
        report.chosen_rho = rho;
        report.final_theta = fit.theta;
      }
    }
  }
  return report;
}

}  // namespace drokit
