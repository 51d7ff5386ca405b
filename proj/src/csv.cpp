#include "survsel/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "survsel/types.hpp"

namespace survsel {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell.push_back(c);
      }
    } else if (c == '"' && cell.empty()) {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell.push_back(c);
    }
  }
  cells.push_back(cell);
  return cells;
}

}  // namespace

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open CSV file: " + path);
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty CSV file: " + path);
  table.header = split_line(line);
  std::size_t row_index = 0;
  while (std::getline(in, line)) {
    ++row_index;
    if (line.empty()) continue;
    auto cells = split_line(line);
    if (cells.size() != table.header.size())
      throw DataError("malformed row " + std::to_string(row_index) + " in " + path + ": expected " +
                      std::to_string(table.header.size()) + " cells, got " +
                      std::to_string(cells.size()));
    table.rows.push_back(std::move(cells));
  }
  return table;
}

void write_csv(const CsvTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write CSV file: " + path);
  auto escape = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string quoted = "\"";
    for (char c : s) {
      if (c == '"') quoted += "\"\"";
      else quoted.push_back(c);
    }
    quoted.push_back('"');
    return quoted;
  };
  for (std::size_t i = 0; i < table.header.size(); ++i)
    out << (i ? "," : "") << escape(table.header[i]);
  out << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << escape(row[i]);
    out << "\n";
  }
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace survsel
