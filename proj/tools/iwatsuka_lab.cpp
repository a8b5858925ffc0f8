// Command-line driver: runs one group of checks (or all of them) from a JSON
// config and writes CSV/JSON artifacts plus report.{json,txt}.
//
// Exit codes: 0 all checks pass (vacuous/recorded/skipped count as pass),
// 1 some check failed, 2 config or parameter error, 3 numeric error.

#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "iwatsuka/harness.hpp"

namespace h = iwatsuka::harness;

namespace {

int run_command(const std::string& command, const std::string& config_path, const std::string& out,
                int threads) {
  h::RunConfig cfg;
  try {
    cfg = config_path.empty() ? h::RunConfig{} : h::load_config(config_path);
    if (!out.empty()) cfg.output_dir = out;
    if (threads > 0) cfg.threads = threads;
    h::validate_config(cfg);
  } catch (const iwatsuka::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  h::RunContext ctx(cfg);
  try {
    auto res = h::run(ctx, command);
    h::write_reports(ctx, command, res);
    std::cout << h::report_text(ctx, command, res);
    return res.exit_code;
  } catch (const iwatsuka::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const iwatsuka::ParameterError& e) {
    std::cerr << "parameter error: " << e.what() << "\n";
    return 2;
  } catch (const iwatsuka::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Band functions, edge currents and evolution checks for magnetic edge Hamiltonians"};
  app.require_subcommand(1);

  std::string config_path, out;
  int threads = 0;
  std::string chosen;

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"bands", "band functions, derivative routes and window checks"},
      {"current", "edge current of wave packets"},
      {"localize", "localization of current-carrying packets"},
      {"smooth", "smoothed edge comparison and positivity"},
      {"constants", "constant ledgers for the smoothed and perturbed edge"},
      {"evolve", "two-dimensional time evolution"},
      {"verify-all", "every check"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON run config")->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory (overrides output_dir)");
    sub->add_option("--threads", threads, "worker threads (0: all cores)")->check(CLI::NonNegativeNumber);
    sub->callback([&chosen, name = name] { chosen = name; });
  }
  auto* list = app.add_subcommand("list-checks", "print the check ids with their group and description");
  list->callback([&chosen] { chosen = "list-checks"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (chosen == "list-checks") {
    for (const auto& d : h::check_registry())
      std::printf("%-22s %-10s %s\n", d.id.c_str(), d.group.c_str(), d.anchor.c_str());
    return 0;
  }
  return run_command(chosen, config_path, out, threads);
}
