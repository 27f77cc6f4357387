#include "cbsa/csv.hpp"

#include <cstdio>
#include <istream>
#include <ostream>

namespace cbsa::csv {

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

void write_row(std::ostream& out, const Row& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out << ',';
    out << row[i];
  }
  out << '\n';
}

Row split_line(const std::string& line) {
  Row out;
  std::string field;
  for (char c : line) {
    if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  out.push_back(std::move(field));
  return out;
}

std::vector<Row> read_all(std::istream& in) {
  std::vector<Row> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) rows.push_back(split_line(line));
  }
  return rows;
}

}  // namespace cbsa::csv
