#pragma once

// Experiment configuration and the command implementations behind the CLI.
//
// Precedence: command-line flags > config file > built-in defaults.

#include "rankctl/controllers.hpp"
#include "rankctl/forecast.hpp"
#include "rankctl/simhub.hpp"
#include "rankctl/sweep.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rankctl {

inline constexpr const char* kVersion = "0.1.0";

// Schema or reference errors detected before any computation.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct DatasetConfig {
  std::string source = "synthetic";  // synthetic | csv
  SyntheticSpec synthetic;
  std::filesystem::path contexts;
  std::filesystem::path groups;
};

struct SplitConfig {
  // identical: train = dev = test = full stream; chronological: contiguous ratios.
  std::string mode = "identical";
  SplitRatios ratios;
};

struct InterventionConfig {
  std::optional<std::vector<double>> tau;              // absolute targets for the test horizon
  std::optional<std::vector<double>> baseline_factors;  // tau = factor * unconstrained exposure
  std::vector<double> phi = {100.0};                    // one value or one per constraint
  std::vector<double> phi_grid = {0.01, 0.1, 1.0, 10.0, 100.0};
  std::string utility_metric = "dcg";   // dcg | rr
  std::string exposure_metric = "rr";   // dcg | rr
  std::optional<std::size_t> cutoff_k = 4;
};

struct ControllerEntry {
  ControllerConfig config;
  std::size_t online_forecasts = 0;  // 0: use the forecast section
};

struct ForecastConfig {
  std::string source = "bootstrap";  // bootstrap | exact (oracle plan on the evaluation stream)
  std::size_t offline_samples = 20;
  std::size_t online_forecasts = 20;
  StrataKey strata = StrataKey::kHalves;
};

struct TuningConfig {
  bool enabled = false;
  TuningGrid grid;
  ProgressMode mode = ProgressMode::kExpected;  // independent of the run mode
  int realized_episodes = 1;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  SplitConfig split;
  InterventionConfig intervention;
  std::vector<ControllerEntry> controllers;
  ForecastConfig forecast;
  TuningConfig tuning;
  std::uint64_t seed = 0;
  ProgressMode progress_mode = ProgressMode::kRealized;
  unsigned workers = 1;  // parsed default: hardware concurrency
  std::filesystem::path output_dir = "out";
  std::string canonical;  // normalized JSON of everything that affects results
};

struct CommandOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<ProgressMode> progress_mode;
  std::optional<unsigned> workers;
  std::optional<std::filesystem::path> output_dir;
};

// Parses and validates; throws ConfigError naming the offending field.
ExperimentConfig parse_config(const std::string& json_text, const CommandOverrides& overrides = {},
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path, const CommandOverrides& overrides = {});
ExperimentConfig default_config(const CommandOverrides& overrides = {});

std::string config_hash(const ExperimentConfig& config);  // FNV-1a 64, hex

// Resolved experiment inputs shared by the commands.
struct Workspace {
  ContextStream stream;
  StreamSplits splits;
  InterventionSpec test_spec;  // tau for the test horizon, phi from the config
  InterventionSpec dev_spec;   // tau for the dev horizon
};

Workspace prepare_workspace(const ExperimentConfig& config);

// Forecast table for an evaluation stream under spec.
ProgressToGoTable make_forecasts(const ExperimentConfig& config, const Workspace& ws, const ContextStream& target,
                                 const InterventionSpec& spec, std::size_t offline_samples,
                                 std::size_t online_forecasts);

// Each command returns the files it wrote.
std::vector<std::filesystem::path> cmd_synth(const ExperimentConfig& config);
std::vector<std::filesystem::path> cmd_run(const ExperimentConfig& config);
std::vector<std::filesystem::path> cmd_sweep(const ExperimentConfig& config);
std::vector<std::filesystem::path> cmd_forecast(const ExperimentConfig& config);
std::vector<std::filesystem::path> cmd_tune(const ExperimentConfig& config);

}  // namespace rankctl
