#include "isiw/csv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>

namespace isiw {

namespace {

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string &line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ','))
    out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',')
    out.emplace_back();
  return out;
}

double parse_number(const std::string &s, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size())
      return v;
  } catch (const std::exception &) {
  }
  throw DomainError("csv line " + std::to_string(line_no) +
                    ": not a number: '" + s + "'");
}

} // namespace

std::size_t CsvTable::column(const std::string &name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end())
    throw DomainError("csv: missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

Eigen::VectorXd CsvTable::column_values(const std::string &name) const {
  const std::size_t c = column(name);
  Eigen::VectorXd v(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    v(static_cast<Index>(i)) = rows[i][c];
  return v;
}

CsvTable read_csv(std::istream &in) {
  CsvTable t;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty())
      continue;
    if (t.header.empty()) {
      t.header = split(line);
      continue;
    }
    const auto cells = split(line);
    if (cells.size() != t.header.size())
      throw DomainError("csv line " + std::to_string(line_no) + ": expected " +
                        std::to_string(t.header.size()) + " fields");
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto &c : cells)
      row.push_back(parse_number(c, line_no));
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty())
    throw DomainError("csv: no header");
  return t;
}

CsvTable read_csv_file(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw DomainError("cannot open " + path);
  return read_csv(in);
}

Points read_points_csv(std::istream &in) {
  const CsvTable t = read_csv(in);
  Points p(static_cast<Index>(t.rows.size()), 2);
  p.col(0) = t.column_values("x");
  p.col(1) = t.column_values("y");
  return p;
}

Dataset read_data_csv(std::istream &in) {
  const CsvTable t = read_csv(in);
  Dataset d;
  d.locations.resize(static_cast<Index>(t.rows.size()), 2);
  d.locations.col(0) = t.column_values("x");
  d.locations.col(1) = t.column_values("y");
  d.values = t.column_values("value");
  return d;
}

std::string format_double(double v) {
  if (std::isnan(v))
    return "nan";
  if (std::isinf(v))
    return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

} // namespace isiw
