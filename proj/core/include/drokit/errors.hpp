#pragma once

#include <stdexcept>
#include <string>

namespace drokit {

// Input-validation failures map to CLI exit code 2, numerical failures to 3.
struct validation_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct numerical_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct length_mismatch : validation_error {
  using validation_error::validation_error;
};
struct not_a_probability : validation_error {
  using validation_error::validation_error;
};
struct index_out_of_range : validation_error {
  using validation_error::validation_error;
};
struct dimension_mismatch : validation_error {
  using validation_error::validation_error;
};
struct invalid_spec : validation_error {
  using validation_error::validation_error;
};
struct empty_input : validation_error {
  using validation_error::validation_error;
};
struct unsupported_loss : validation_error {
  using validation_error::validation_error;
};
struct too_few_rows : validation_error {
  using validation_error::validation_error;
};
struct schema_mismatch : validation_error {
  using validation_error::validation_error;
};
struct size_guard : validation_error {
  using validation_error::validation_error;
};

struct numerical_failure : numerical_error {
  using numerical_error::numerical_error;
};
struct non_finite_objective : numerical_error {
  using numerical_error::numerical_error;
};
struct singular_group_covariance : numerical_error {
  using numerical_error::numerical_error;
};
struct hessian_not_pd : numerical_error {
  using numerical_error::numerical_error;
};

}  // namespace drokit
