#pragma once

#include <string>
#include <vector>

namespace survsel {

/// Minimal CSV table: header row plus string cells. Empty cell = missing.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 if absent
};

CsvTable read_csv(const std::string& path);
void write_csv(const CsvTable& table, const std::string& path);

/// Shortest round-trip formatting for doubles, so emitted CSVs are bitwise
/// reproducible and parse back to the identical value.
std::string format_double(double v);

}  // namespace survsel
