// neurotwin command-line front end. Data goes to the declared output paths
// ("-" = stdout); diagnostics go to stderr.
// Exit codes: 0 ok, 1 usage error, 2 data error.

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "commands.hpp"
#include "neurotwin/error.hpp"

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace

namespace nt_cli {

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("NEUROTWIN_SEED"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const auto v = std::strtoull(env, &end, 10);
    if (end != nullptr && *end == '\0') return v;
    throw UsageError("NEUROTWIN_SEED is not an unsigned integer: '" + std::string(env) + "'");
  }
  throw UsageError("--seed is required (or set NEUROTWIN_SEED)");
}

void usage_error(const std::string& msg) { throw UsageError(msg); }

}  // namespace nt_cli

int main(int argc, char** argv) {
  CLI::App app{"neurotwin: EEG denoising, fog gating, toy ViT tumor maps, brain-state and kinetics tools"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  nt_cli::Commands cmds;
  cmds.register_all(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    cmds.run();
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const neurotwin::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
