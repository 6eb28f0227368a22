#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "sigprop/csv.hpp"
#include "sigprop/errors.hpp"
#include "sigprop/harness.hpp"

using namespace sigprop;
namespace fs = std::filesystem;

namespace {
fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sigprop-unit-" + name);
  fs::remove_all(p);
  return p;
}

CsvTable read_table(const fs::path& p) {
  std::ifstream in(p);
  return read_numeric_csv(in, true);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string field_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}
}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("config text parsing") {
    ExperimentConfig c;
    apply_config_text(c, "mode = asymptotics  # comment\nnorm = erf\nalpha = 1.5\n\nsweep_sigma_21 = 0.5, 1.0\n", "t");
    CHECK(c.mode == Mode::Asymptotics);
    CHECK(c.hyper.phi.tanh_like());
    CHECK(c.hyper.phi.alpha == 1.5);
    CHECK(c.sweep.sigma_21 == std::vector<double>{0.5, 1.0});
    CHECK(c.explicit_keys.count("alpha") == 1);
    apply_override(c, "blocks=7");
    CHECK(c.blocks == 7);
    CHECK(c.to_map().at("blocks") == "7");
  }

  TEST_CASE("config errors name the field") {
    ExperimentConfig c;
    CHECK(field_of([&] { c.set("blocks", "abc"); }) == "blocks");
    CHECK(field_of([&] { c.set("no_such_key", "1"); }) == "no_such_key");
    CHECK(field_of([&] { c.set("norm", "relu"); }) == "norm");
    CHECK(field_of([&] { apply_override(c, "blocks"); }) == "blocks");
    CHECK(field_of([&] { load_config("/nonexistent/file.cfg"); }) == "config");
    ExperimentConfig bad;
    bad.initial = {1.0, 2.0};
    CHECK(field_of([&] { bad.validate(); }) == "p0");
  }

  TEST_CASE("compare rejects inconsistent scales") {
    ExperimentConfig c;
    apply_config_text(c, "mode = compare\nsigma_o = 1\nsigma_v = 0.5\nsigma_ov = 0.9\n", "t");
    CHECK(field_of([&] { c.validate(); }) == "sigma_ov");
    c.set("sigma_ov", "0.5");
    CHECK_NOTHROW(c.validate());
    CHECK(c.compare_hyper().sigma_ov == doctest::Approx(0.5));
  }

  TEST_CASE("theory mode writes artifacts and a complete manifest") {
    ExperimentConfig c;
    c.out = scratch("theory");
    const RunResult r = run(c);
    REQUIRE(r.exit_code == exit_code::kOk);
    const CsvTable t = read_table(c.out / "curves.csv");
    REQUIRE(t.rows.size() == 12);
    for (std::size_t i = 1; i < t.rows.size(); ++i) CHECK(t.rows[i][1] >= t.rows[i - 1][1]);
    const auto manifest = nlohmann::json::parse(slurp(c.out / "manifest.json"));
    CHECK(manifest["status"] == "complete");
    CHECK(manifest["files"].size() == 2);
    CHECK(fs::file_size(c.out / "trajectory.csv") > 0);
  }

  TEST_CASE("reruns are byte identical") {
    ExperimentConfig c;
    c.mode = Mode::Simulate;
    c.sim.d = 16;
    c.sim.n = 4;
    c.blocks = 2;
    c.estimator = {3, 2, ProbeKind::Gaussian, 1};
    c.seed = 12;
    c.out = scratch("rerun-a");
    REQUIRE(run(c).exit_code == exit_code::kOk);
    const std::string first = slurp(c.out / "measurements.csv");
    c.out = scratch("rerun-b");
    REQUIRE(run(c).exit_code == exit_code::kOk);
    CHECK(slurp(c.out / "measurements.csv") == first);
    CHECK(!first.empty());
  }

  TEST_CASE("failures map onto exit codes") {
    ExperimentConfig c;
    c.blocks = 0;
    c.out = scratch("bad");
    CHECK(run(c).exit_code == exit_code::kConfig);
    CHECK(emit_figure_data("fig99", ExperimentConfig{}).exit_code == exit_code::kConfig);
    CHECK(guarded([]() -> RunResult { throw NumericalError("boom", 3); }).exit_code == exit_code::kNumerical);
  }

  TEST_CASE("sweep reproduces the half exponent") {
    ExperimentConfig c;
    c.mode = Mode::Sweep;
    c.sweep.sigma_21 = {std::sqrt(2.0) * 0.7};
    c.sweep.sigma_ov = {0.7};
    c.out = scratch("sweep");
    REQUIRE(run(c).exit_code == exit_code::kOk);
    const std::string s = slurp(c.out / "sweep.csv");
    std::istringstream in(s);
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    std::vector<std::string> cells;
    std::stringstream rs(row);
    for (std::string cell; std::getline(rs, cell, ',');) cells.push_back(cell);
    REQUIRE(cells.size() == 13);
    CHECK(cells[4] == "critical_powerlaw");
    CHECK(std::stod(cells[5]) == doctest::Approx(0.5));
  }

  TEST_CASE("figure data") {
    ExperimentConfig c;
    c.sweep.sigma_21 = {1.0};
    c.sweep.sigma_ov = {0.0, 1.0};
    c.out = scratch("fig4b");
    REQUIRE(emit_figure_data("fig4b", c).exit_code == exit_code::kOk);
    const CsvTable t = read_table(c.out / "fig4b.csv");
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0][2] == doctest::Approx(1.0));
    CHECK(t.rows[1][2] == doctest::Approx(1.0 / 3.0));

    ExperimentConfig f;
    f.out = scratch("fig6");
    REQUIRE(emit_figure_data("fig6", f).exit_code == exit_code::kOk);
    const CsvTable k = read_table(f.out / "fig6.csv");
    REQUIRE(k.rows.size() == 13);
    CHECK(k.rows[0][1] == 0.0);
    for (std::size_t i = 1; i < k.rows.size(); ++i) CHECK(k.rows[i][1] >= k.rows[i - 1][1]);
  }
}
