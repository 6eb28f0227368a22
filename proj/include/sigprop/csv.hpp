#pragma once

#include <iosfwd>
#include <ostream>
#include <string>
#include <vector>

namespace sigprop {

/// Comma-separated writer: header row, 17 significant digits for doubles.
class CsvWriter {
 public:
  CsvWriter(std::ostream& os, std::vector<std::string> header);

  template <typename... Ts>
  void row(const Ts&... values) {
    bool first = true;
    ((put(values, first), first = false), ...);
    os_ << '\n';
  }

  void row_values(const std::vector<double>& values);

 private:
  void sep(bool first) {
    if (!first) os_ << ',';
  }
  void put(double v, bool first);
  void put(const std::string& v, bool first) { sep(first); os_ << v; }
  void put(const char* v, bool first) { sep(first); os_ << v; }
  template <typename I>
    requires std::is_integral_v<I>
  void put(I v, bool first) {
    sep(first);
    os_ << v;
  }

  std::ostream& os_;
  std::size_t columns_;
};

std::string format_double(double v);

/// Parsed numeric CSV: optional header row, then rows of doubles.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

CsvTable read_numeric_csv(std::istream& is, bool has_header);

}  // namespace sigprop
