// sigprop: theory, simulation and comparison runs from the command line.

#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>

#include "acceptance.hpp"
#include "sigprop/errors.hpp"
#include "sigprop/experiment_config.hpp"
#include "sigprop/harness.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  int threads = 0;
  std::vector<std::string> sets;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "key = value experiment file");
  cmd->add_option("--out", f.out, "output directory (default: $SIGPROP_OUT or ./sigprop-out)");
  cmd->add_option("--seed", f.seed, "root seed");
  cmd->add_option("--threads", f.threads, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--set", f.sets, "override a config key (key=value), repeatable");
}

sigprop::ExperimentConfig resolve(const CommonFlags& f, const CLI::App* cmd,
                                  std::optional<sigprop::Mode> mode) {
  sigprop::ExperimentConfig cfg;
  if (const char* env = std::getenv("SIGPROP_OUT"); env && *env) cfg.out = env;
  if (!f.config.empty()) {
    cfg = sigprop::load_config(f.config);
    if (!cfg.explicit_keys.count("out")) {
      if (const char* env = std::getenv("SIGPROP_OUT"); env && *env) cfg.out = env;
    }
  }
  if (mode) cfg.mode = *mode;
  for (const auto& s : f.sets) sigprop::apply_override(cfg, s);
  if (cmd->count("--out")) cfg.set("out", f.out);
  if (cmd->count("--seed")) cfg.set("seed", std::to_string(f.seed));
  if (cmd->count("--threads")) cfg.set("threads", std::to_string(f.threads));
  return cfg;
}

int report(const sigprop::RunResult& r) {
  if (r.exit_code == sigprop::exit_code::kOk) {
    for (const auto& f : r.files) std::cout << "wrote " << f.string() << "\n";
    if (!r.message.empty()) std::cout << r.message << "\n";
  } else {
    std::cerr << r.message << "\n";
  }
  return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Signal propagation in transformers at initialization"};
  app.require_subcommand(1);

  CommonFlags flags;
  const std::vector<std::pair<const char*, sigprop::Mode>> modes{
      {"theory", sigprop::Mode::Theory},       {"asymptotics", sigprop::Mode::Asymptotics},
      {"simulate", sigprop::Mode::Simulate},   {"compare", sigprop::Mode::Compare},
      {"sweep", sigprop::Mode::Sweep}};
  const std::map<std::string, std::string> help{
      {"theory", "covariance trajectory and APJN curves"},
      {"asymptotics", "fixed points and asymptotic laws over the sweep axes"},
      {"simulate", "measured APJNs and activation statistics from the toy transformer"},
      {"compare", "theory vs. measured backward APJN with GMFE per depth region"},
      {"sweep", "Cartesian product of sweep axes running sweep_mode at each point"}};
  std::map<CLI::App*, sigprop::Mode> mode_of;
  for (const auto& [name, mode] : modes) {
    auto* cmd = app.add_subcommand(name, help.at(name));
    add_common(cmd, flags);
    mode_of[cmd] = mode;
  }

  auto* figure = app.add_subcommand("figure", "write the data behind one figure");
  std::string tag;
  figure->add_option("tag", tag, "fig1a, fig2, fig4a, fig4b or fig6")->required();
  add_common(figure, flags);

  auto* check = app.add_subcommand("check", "run the acceptance suite");
  std::vector<int> only;
  int check_threads = 1;
  bool verbose = false;
  check->add_option("--only", only, "criteria to run (default: all)")
      ->check(CLI::Range(1, sigprop::acceptance::count()));
  check->add_option("--threads", check_threads, "worker threads")->check(CLI::PositiveNumber);
  check->add_flag("--verbose", verbose, "print per-criterion diagnostics");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : sigprop::exit_code::kConfig;
  }

  if (check->parsed()) {
    sigprop::acceptance::Options opt;
    opt.threads = check_threads;
    opt.log = verbose ? &std::cout : nullptr;
    const auto results = sigprop::acceptance::run_all(only, opt, std::cout);
    const bool ok = std::all_of(results.begin(), results.end(), [](const auto& r) { return r.pass; });
    return ok ? sigprop::exit_code::kOk : sigprop::exit_code::kAcceptance;
  }

  return report(sigprop::guarded([&]() -> sigprop::RunResult {
    if (figure->parsed()) {
      return sigprop::emit_figure_data(tag, resolve(flags, figure, std::nullopt));
    }
    for (auto& [cmd, mode] : mode_of) {
      if (cmd->parsed()) return sigprop::run(resolve(flags, cmd, mode));
    }
    throw sigprop::ConfigError("mode", "no subcommand");
  }));
}
