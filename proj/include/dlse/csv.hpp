#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace dlse::csv {

/// Header plus rows of raw cells. No quoting: cells never contain commas.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index; throws SchemaError naming the column if absent.
  std::size_t column(const std::string& name) const;
  bool has_column(const std::string& name) const;
  /// Cell parsed as a double; SchemaError names the column and line.
  double number(std::size_t row, std::size_t col) const;
  const std::string& cell(std::size_t row, std::size_t col) const { return rows[row][col]; }

  std::string source;  // file name for diagnostics
};

/// Reads a comma-separated file with a header line. Blank lines are
/// skipped; ragged rows throw SchemaError.
Table read(const std::string& path);
Table parse(const std::string& text, const std::string& source = "<memory>");

/// Shortest text that parses back to the same double.
std::string format(double v);

void write(const std::string& path, const std::vector<std::string>& header,
           const std::vector<std::vector<std::string>>& rows);

}  // namespace dlse::csv
