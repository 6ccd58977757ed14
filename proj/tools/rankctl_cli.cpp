// rankctl: synth | run | sweep | forecast | tune.
// Exit codes: 0 success, 2 config error, 3 solver failure, 1 anything else.

#include "rankctl/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> progress_mode;
  std::optional<unsigned> workers;
  std::optional<std::string> out;
};

void add_flags(CLI::App* cmd, Flags& flags) {
  cmd->add_option("--config", flags.config, "JSON experiment config (defaults apply when omitted)");
  cmd->add_option("--seed", flags.seed, "Override the config seed");
  cmd->add_option("--progress-mode", flags.progress_mode, "expected | realized")
      ->check(CLI::IsMember({"expected", "realized"}));
  cmd->add_option("--workers", flags.workers, "Parallel sweep cells")->check(CLI::PositiveNumber);
  cmd->add_option("--out", flags.out, "Output directory");
}

rankctl::ExperimentConfig resolve(const Flags& flags) {
  rankctl::CommandOverrides o;
  o.seed = flags.seed;
  if (flags.progress_mode) o.progress_mode = rankctl::parse_progress_mode(*flags.progress_mode);
  o.workers = flags.workers;
  if (flags.out) o.output_dir = *flags.out;
  return flags.config.empty() ? rankctl::default_config(o) : rankctl::load_config(flags.config, o);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ranking under long-term exposure constraints"};
  app.set_version_flag("--version", std::string(rankctl::kVersion));
  app.require_subcommand(1);
  Flags flags;

  using Command = std::vector<std::filesystem::path> (*)(const rankctl::ExperimentConfig&);
  const std::vector<std::tuple<std::string, std::string, Command>> commands = {
      {"synth", "Write the synthetic dataset CSVs", rankctl::cmd_synth},
      {"run", "Run each configured controller once; write results and traces", rankctl::cmd_run},
      {"sweep", "Run every controller across the phi grid", rankctl::cmd_sweep},
      {"forecast", "Write the progress-to-go forecast table", rankctl::cmd_forecast},
      {"tune", "Tune controller parameters on the dev split", rankctl::cmd_tune},
  };
  Command chosen = nullptr;
  for (const auto& [name, help, fn] : commands) {
    CLI::App* cmd = app.add_subcommand(name, help);
    add_flags(cmd, flags);
    cmd->callback([&chosen, fn = fn] { chosen = fn; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const rankctl::ExperimentConfig config = resolve(flags);
    for (const auto& path : chosen(config)) std::cout << path.string() << '\n';
    return 0;
  } catch (const rankctl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const rankctl::SolverError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return 3;
  } catch (const rankctl::InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
