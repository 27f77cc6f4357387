#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cbsa::csv {

// 12 significant digits, printf %.12g.
std::string format_real(double v);

using Row = std::vector<std::string>;

void write_row(std::ostream& out, const Row& row);
// Plain comma splitting; the files written here never quote fields.
Row split_line(const std::string& line);
std::vector<Row> read_all(std::istream& in);

}  // namespace cbsa::csv
