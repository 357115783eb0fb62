#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace condcov {

// Write-then-rename so readers never observe a partial file.
void write_file_atomic(const std::string& path, const std::string& content);

struct Dataset {
  std::vector<std::string> x_names;
  std::string y_name;
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

// Parse a comma-separated file with a header row and select the named
// columns. Throws ConfigError for missing/duplicate column selections and
// DataError for unparsable cells or too few rows.
Dataset ingest_csv(const std::string& path,
                   const std::vector<std::string>& x_columns,
                   const std::string& y_column);

}  // namespace condcov
