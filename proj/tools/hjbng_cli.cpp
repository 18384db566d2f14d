// Command-line front end: hjbng <command> [--key value ...]

#include <fstream>
#include <iostream>
#include <string>
#include <string_view>
#include <vector>

#include <CLI11.hpp>

#include "hjbng/harness.hpp"

namespace {

using Command = int (*)(const hjbng::ExperimentConfig&, std::ostream&, std::ostream&);

struct Subcommand {
  const char* name;
  const char* help;
  Command run;
};

const Subcommand kCommands[] = {
    {"identities", "exponential-moment identities by Gauss-Laguerre quadrature",
     hjbng::cmd_identities},
    {"ng-solve", "integrate the projected parameter dynamics", hjbng::cmd_ng_solve},
    {"fd-solve", "finite-difference solution on one grid", hjbng::cmd_fd_solve},
    {"compare", "finite-difference convergence and trial distance", hjbng::cmd_compare},
    {"sweep", "one-parameter-at-a-time error sweeps", hjbng::cmd_sweep},
    {"price", "indifference prices for a list of positions", hjbng::cmd_price},
    {"mc-check", "Monte Carlo verification of the value function", hjbng::cmd_mc},
};

// The config file must be applied before any flag, whatever their order.
std::string find_config_path(int argc, char** argv) {
  std::string path;
  for (int i = 1; i < argc; ++i) {
    const std::string_view a = argv[i];
    if (a == "--config" && i + 1 < argc) {
      path = argv[i + 1];
    } else if (a.rfind("--config=", 0) == 0) {
      path = std::string(a.substr(9));
    }
  }
  return path;
}

}  // namespace

int main(int argc, char** argv) {
  hjbng::ExperimentConfig cfg;
  CLI::App app{"HJB solvers for a market with non-tradable assets"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_path;
  app.add_option("--config", config_path, "flat key = value file; flags override it");
  app.add_option("--out", out_path, "write CSV here instead of standard output");
  for (const auto& key : hjbng::config_keys()) {
    app.add_option_function<std::string>(
        "--" + key.name, [&cfg, &key](const std::string& v) { key.set(cfg, v); }, key.help);
  }

  const Subcommand* chosen = nullptr;
  for (const auto& c : kCommands) {
    app.add_subcommand(c.name, c.help)->callback([&chosen, &c] { chosen = &c; });
  }

  try {
    const std::string path = find_config_path(argc, argv);
    if (!path.empty()) hjbng::load_config_file(cfg, path);
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return hjbng::kExitInvalidConfig;
  } catch (const hjbng::Error& e) {
    std::cerr << "invalid configuration: " << e.what() << '\n';
    return hjbng::kExitInvalidConfig;
  }

  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path);
    if (!file) {
      std::cerr << "cannot open output file '" << out_path << "'\n";
      return hjbng::kExitInvalidConfig;
    }
  }
  std::ostream& out = out_path.empty() ? std::cout : file;

  try {
    return chosen->run(cfg, out, std::cerr);
  } catch (const hjbng::ConfigError& e) {
    std::cerr << "invalid configuration: " << e.what() << '\n';
    return hjbng::kExitInvalidConfig;
  } catch (const hjbng::InvalidParameters& e) {
    std::cerr << "invalid configuration: " << e.what() << '\n';
    return hjbng::kExitInvalidConfig;
  } catch (const hjbng::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return hjbng::kExitCheckFailed;
  }
}
