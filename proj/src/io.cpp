#include "condcov/io.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "condcov/errors.hpp"

namespace condcov {

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + tmp);
    out << content;
    if (!out) throw DataError("failed to write: " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("failed to move " + tmp + " to " + path);
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    // trim surrounding whitespace
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_cell(const std::string& cell, std::size_t row,
                  const std::string& column) {
  double value = 0.0;
  const char* first = cell.data();
  const char* last = first + cell.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last)
    throw DataError("non-numeric value '" + cell + "' at row " +
                    std::to_string(row) + ", column '" + column + "'");
  return value;
}

}  // namespace

Dataset ingest_csv(const std::string& path,
                   const std::vector<std::string>& x_columns,
                   const std::string& y_column) {
  if (x_columns.empty()) throw ConfigError("ingest: no x columns selected");
  for (const auto& name : x_columns)
    if (name == y_column)
      throw ConfigError("ingest: column '" + name +
                        "' selected as both x and y");
  for (std::size_t a = 0; a < x_columns.size(); ++a)
    for (std::size_t b = a + 1; b < x_columns.size(); ++b)
      if (x_columns[a] == x_columns[b])
        throw ConfigError("ingest: duplicate x column '" + x_columns[a] + "'");

  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("ingest: empty file");
  const std::vector<std::string> header = split_line(line);

  auto find_col = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw ConfigError("ingest: column '" + name + "' not found in header");
    return static_cast<int>(it - header.begin());
  };
  std::vector<int> x_idx;
  for (const auto& name : x_columns) x_idx.push_back(find_col(name));
  const int y_idx = find_col(y_column);

  std::vector<std::vector<double>> x_rows;
  std::vector<double> y_vals;
  std::size_t row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (line.empty() ||
        line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    const std::vector<std::string> cells = split_line(line);
    if (cells.size() != header.size())
      throw DataError("ingest: row " + std::to_string(row_no) + " has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(header.size()));
    std::vector<double> xr;
    xr.reserve(x_idx.size());
    for (std::size_t c = 0; c < x_idx.size(); ++c)
      xr.push_back(parse_cell(cells[x_idx[c]], row_no, x_columns[c]));
    x_rows.push_back(std::move(xr));
    y_vals.push_back(parse_cell(cells[y_idx], row_no, y_column));
  }
  if (x_rows.size() < 20)
    throw DataError("ingest: sample too small (need at least 20 rows, got " +
                    std::to_string(x_rows.size()) + ")");

  Dataset out;
  out.x_names = x_columns;
  out.y_name = y_column;
  out.x.resize(x_rows.size(), x_idx.size());
  out.y.resize(y_vals.size());
  for (std::size_t r = 0; r < x_rows.size(); ++r) {
    for (std::size_t c = 0; c < x_idx.size(); ++c) out.x(r, c) = x_rows[r][c];
    out.y(r) = y_vals[r];
  }
  return out;
}

}  // namespace condcov
