#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sigprop::acceptance {

struct Result {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
  double budget_seconds = 0.0;
};

struct Options {
  int threads = 1;
  std::ostream* log = nullptr;  // per-criterion diagnostics
};

int count();
std::string name(int id);

/// Runs one criterion (1-based). Exceptions are reported as failures.
Result run(int id, const Options& options);
/// Runs the given criteria (all when empty), printing one line per criterion to `out`.
std::vector<Result> run_all(const std::vector<int>& ids, const Options& options, std::ostream& out);

std::string format_line(const Result& r);

}  // namespace sigprop::acceptance
