#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "isiw/core.hpp"

namespace isiw {

/// A numeric CSV table with a header row. Blank lines are skipped.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Column position by name; throws DomainError when absent.
  std::size_t column(const std::string &name) const;
  Eigen::VectorXd column_values(const std::string &name) const;
};

CsvTable read_csv(std::istream &in);
CsvTable read_csv_file(const std::string &path);

/// Columns x,y (extra columns ignored).
Points read_points_csv(std::istream &in);

/// Columns x,y,value (extra columns ignored).
Dataset read_data_csv(std::istream &in);

/// Shortest round-trip representation ("%.17g"; non-finite as nan/inf).
std::string format_double(double v);

} // namespace isiw
