#pragma once

#include <Eigen/Core>
#include <string>
#include <utility>
#include <vector>

#include "drokit/losses.hpp"

namespace drokit {

inline constexpr const char* kVersion = "drokit 0.1.0";

// 17 significant digits; round-trips doubles exactly.
std::string format_double(double value);

// Dataset CSV schema: header row with columns x1..xd, y, and optionally
// group, in any order; numeric cells; one row per observation. Base weights
// are not serialized (uniform on read).
dataset read_dataset_csv(const std::string& path);
void write_dataset_csv(const std::string& path, const dataset& data);

// Single-column CSV with header "loss".
Eigen::VectorXd read_loss_csv(const std::string& path);

struct result_row {
  std::string method;
  std::string metric;
  double value = 0.0;
};

// Header method,metric,value; one row per entry, values at 17 digits.
void write_results_csv(const std::string& path, const std::vector<result_row>& rows);

// key=value lines sorted by key, a version entry appended. Written beside
// every output so a run can be replayed exactly.
void write_manifest(const std::string& path,
                    std::vector<std::pair<std::string, std::string>> entries);

}  // namespace drokit
