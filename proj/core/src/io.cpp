#include "drokit/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "drokit/errors.hpp"

namespace drokit {

std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream stream(line);
  while (std::getline(stream, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

double parse_cell(const std::string& cell, const std::string& path) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw schema_mismatch(path + ": non-numeric cell '" + cell + "'");
  }
}

std::ifstream open_for_read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw schema_mismatch("cannot open " + path);
  return in;
}

std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw schema_mismatch("cannot write " + path);
  return out;
}

}  // namespace

dataset read_dataset_csv(const std::string& path) {
  std::ifstream in = open_for_read(path);
  std::string line;
  if (!std::getline(in, line)) throw schema_mismatch(path + ": empty file");
  const std::vector<std::string> header = split_csv_line(strip_cr(line));

  int y_col = -1, group_col = -1;
  std::vector<std::pair<int, int>> x_cols;  // (feature index, column)
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string& name = header[c];
    if (name == "y") {
      if (y_col >= 0) throw schema_mismatch(path + ": duplicate y column");
      y_col = static_cast<int>(c);
    } else if (name == "group") {
      if (group_col >= 0) throw schema_mismatch(path + ": duplicate group column");
      group_col = static_cast<int>(c);
    } else if (name.size() > 1 && name[0] == 'x' &&
               name.find_first_not_of("0123456789", 1) == std::string::npos) {
      x_cols.emplace_back(std::stoi(name.substr(1)), static_cast<int>(c));
    } else {
      throw schema_mismatch(path + ": unexpected column '" + name + "'");
    }
  }
  if (y_col < 0) throw schema_mismatch(path + ": missing y column");
  if (x_cols.empty()) throw schema_mismatch(path + ": no x columns");
  std::sort(x_cols.begin(), x_cols.end());
  for (std::size_t j = 0; j < x_cols.size(); ++j)
    if (x_cols[j].first != static_cast<int>(j) + 1)
      throw schema_mismatch(path + ": x columns must be x1..xd");
  const auto d = static_cast<std::ptrdiff_t>(x_cols.size());

  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw schema_mismatch(path + ": row has " + std::to_string(cells.size()) +
                            " cells, expected " + std::to_string(header.size()));
    std::vector<double> row;
    row.reserve(cells.size());
    for (const std::string& cell : cells) row.push_back(parse_cell(cell, path));
    rows.push_back(std::move(row));
  }
  const auto n = static_cast<std::ptrdiff_t>(rows.size());
  if (n == 0) throw schema_mismatch(path + ": no data rows");

  Eigen::MatrixXd features(n, d);
  Eigen::VectorXd targets(n);
  Eigen::VectorXd groups(group_col >= 0 ? n : 0);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    for (std::ptrdiff_t j = 0; j < d; ++j)
      features(i, j) = rows[i][static_cast<std::size_t>(x_cols[static_cast<std::size_t>(j)].second)];
    targets(i) = rows[i][static_cast<std::size_t>(y_col)];
    if (group_col >= 0) groups(i) = rows[i][static_cast<std::size_t>(group_col)];
  }
  if (group_col >= 0)
    return dataset::make(std::move(features), std::move(targets), std::move(groups));
  return dataset::make(std::move(features), std::move(targets));
}

void write_dataset_csv(const std::string& path, const dataset& data) {
  std::ofstream out = open_for_write(path);
  for (int j = 1; j <= data.dim(); ++j) out << "x" << j << ",";
  out << "y";
  if (data.groups) out << ",group";
  out << "\n";
  for (int i = 0; i < data.n(); ++i) {
    for (int j = 0; j < data.dim(); ++j) out << format_double(data.features(i, j)) << ",";
    out << format_double(data.targets(i));
    if (data.groups) out << "," << format_double((*data.groups)(i));
    out << "\n";
  }
}

Eigen::VectorXd read_loss_csv(const std::string& path) {
  std::ifstream in = open_for_read(path);
  std::string line;
  if (!std::getline(in, line)) throw schema_mismatch(path + ": empty file");
  if (strip_cr(line) != "loss") throw schema_mismatch(path + ": expected header 'loss'");
  std::vector<double> values;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (line.empty()) continue;
    values.push_back(parse_cell(line, path));
  }
  if (values.empty()) throw schema_mismatch(path + ": no loss rows");
  return Eigen::Map<const Eigen::VectorXd>(values.data(),
                                           static_cast<std::ptrdiff_t>(values.size()));
}

void write_results_csv(const std::string& path, const std::vector<result_row>& rows) {
  std::ofstream out = open_for_write(path);
  out << "method,metric,value\n";
  for (const result_row& row : rows)
    out << row.method << "," << row.metric << "," << format_double(row.value) << "\n";
}

void write_manifest(const std::string& path,
                    std::vector<std::pair<std::string, std::string>> entries) {
  entries.emplace_back("version", kVersion);
  std::sort(entries.begin(), entries.end());
  std::ofstream out = open_for_write(path);
  for (const auto& [key, value] : entries) out << key << "=" << value << "\n";
}

}  // namespace drokit
