#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "drokit/losses.hpp"
#include "drokit/solvers.hpp"

namespace drokit {

struct selection_grid {
  std::vector<double> k_values;
  std::vector<double> rho_values;
};

struct selection_report {
  double chosen_k = 0.0;
  double chosen_rho = 0.0;
  struct score_entry {
    double k;
    double rho;
    double score;
  };
  // Filled in grid order: k outer, rho inner.
  std::vector<score_entry> score_table;
  // Y-split bookkeeping; empty for auxiliary_select.
  std::vector<int> group_of_row;
  std::vector<bool> validation_mask;
  Eigen::VectorXd final_theta;
};

// Target-quantile slicing: rows sorted by target descending (ties by row
// index) are cut into num_slices contiguous slices, remainder rows going to
// the last slice. Each slice is split train/validation by a seeded shuffle
// (floor(train_fraction * size) train rows). A robust fit on the pooled
// train rows is scored by its worst per-slice held-out weighted mean loss;
// the first grid point attaining the minimum wins and is refit on all rows.
// Real-valued targets only: hinge and binary_logistic are rejected.
selection_report ysplit_select(const loss_model& model, const dataset& data,
                               const selection_grid& grid, const constraint_set& constraint,
                               const fit_config& config, int num_slices = 5,
                               double train_fraction = 0.8, std::uint64_t seed = 0);

// Fits each grid point on all of `train` and scores it by the weighted mean
// loss on the auxiliary sample; first minimizer wins, no refit needed.
selection_report auxiliary_select(const loss_model& model, const dataset& train,
                                  const dataset& auxiliary, const selection_grid& grid,
                                  const constraint_set& constraint, const fit_config& config);

}  // namespace drokit
