#include "sigprop/csv.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <sstream>

#include "sigprop/errors.hpp"

namespace sigprop {

CsvWriter::CsvWriter(std::ostream& os, std::vector<std::string> header)
    : os_(os), columns_(header.size()) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) os_ << ',';
    os_ << header[i];
  }
  os_ << '\n';
}

void CsvWriter::row_values(const std::vector<double>& values) {
  if (values.size() != columns_) throw ShapeError("CSV row width does not match header");
  for (std::size_t i = 0; i < values.size(); ++i) put(values[i], i == 0);
  os_ << '\n';
}

void CsvWriter::put(double v, bool first) {
  sep(first);
  os_ << format_double(v);
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

CsvTable read_numeric_csv(std::istream& is, bool has_header) {
  CsvTable table;
  std::string line;
  bool header_pending = has_header;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    if (header_pending) {
      while (std::getline(ss, cell, ',')) table.header.push_back(cell);
      header_pending = false;
      continue;
    }
    std::vector<double> row;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw ShapeError("non-numeric CSV cell '" + cell + "' on line " + std::to_string(line_no));
      }
    }
    if (!table.rows.empty() && row.size() != table.rows.front().size()) {
      throw ShapeError("ragged CSV row on line " + std::to_string(line_no));
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace sigprop
