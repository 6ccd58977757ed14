#pragma once

// Offline estimation of progress-to-go forecasts and gain tuning.

#include "rankctl/controllers.hpp"
#include "rankctl/simhub.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace rankctl {

enum class StrataKey { kUniform, kHourOfDay, kDayOfWeek, kHalves };

std::string to_string(StrataKey key);
StrataKey parse_strata_key(const std::string& name);

// Stratum label of every context in a stream. Explicit stream labels are
// used for hour/day keys when present; otherwise hour = (t - 1) mod 24,
// day = ((t - 1) / 24) mod 7, halves split the stream at its midpoint and
// uniform maps everything to 0.
std::vector<int> strata_labels(StrataKey key, const ContextStream& stream);
// Labels for an abstract timeline 1..horizon (contexts unknown).
std::vector<int> timeline_labels(StrataKey key, int horizon);

struct ForecastPlan {
  std::vector<std::vector<std::size_t>> index_sequences;  // [b][t - 1] -> dataset index
  StrataKey strata = StrataKey::kUniform;

  std::size_t num_samples() const { return index_sequences.size(); }
  int horizon() const { return index_sequences.empty() ? 0 : static_cast<int>(index_sequences.front().size()); }
};

// For each sample b and step t draws a dataset index uniformly from the
// dataset contexts sharing t's stratum label. Throws InvalidInput naming the
// stratum when a timeline stratum is absent from the dataset.
ForecastPlan stratified_bootstrap(const ContextStream& dataset, std::span<const int> timeline_strata,
                                  std::size_t num_samples, StrataKey key, std::uint64_t seed);
ForecastPlan stratified_bootstrap(const ContextStream& dataset, int horizon, std::size_t num_samples,
                                  StrataKey key, std::uint64_t seed);

struct OfflinePolicy {
  std::map<std::size_t, RankingPolicy> by_index;  // dataset index -> policy
  double objective = 0.0;                          // sample-averaged objective
};

// Best contextual stationary policy: one policy per sampled dataset index,
// shared across every (b, t) that drew it, each sample paying its own hinge.
OfflinePolicy fit_offline_policy(const ForecastPlan& plan, const ContextStream& dataset,
                                 const InterventionSpec& spec, const HorizonOptions& options = {});

// Suffix sums of predicted progress along the first num_forecasts samples.
ProgressToGoTable progress_to_go(const OfflinePolicy& policy, const ForecastPlan& plan,
                                 const ContextStream& dataset, const InterventionSpec& spec,
                                 std::size_t num_forecasts);

// Exact progress-to-go of a known plan, replicated num_forecasts times.
ProgressToGoTable progress_to_go_from_plan(std::span<const RankingPolicy> plan, const ContextStream& stream,
                                           const InterventionSpec& spec, std::size_t num_forecasts);

// CSV with header b,t,constraint_index,value (1-based).
void write_progress_to_go(const ProgressToGoTable& table, const std::filesystem::path& path);
ProgressToGoTable read_progress_to_go(const std::filesystem::path& path);

struct TuningRecord {
  std::size_t index = 0;
  ControllerConfig config;
  double objective = 0.0;
};

struct TuningResult {
  std::size_t best_index = 0;
  ControllerConfig best;
  double best_objective = 0.0;
  std::vector<TuningRecord> log;
};

struct TuningOptions {
  ProgressMode mode = ProgressMode::kExpected;
  int realized_episodes = 1;  // median over this many seeded episodes in realized mode
  std::uint64_t seed = 0;
};

// One closed-loop episode per grid point on the development stream, scored by
// the episode objective; later entries win ties.
TuningResult tune_gain(const ContextStream& dev_stream, std::span<const ControllerConfig> grid,
                       const InterventionSpec& spec, const TuningOptions& options = {});

struct TuningGrid {
  std::vector<double> gains = {1e-3, 1e-2, 1e-1, 1e0, 1e1, 1e2, 1e3};
  std::vector<double> betas = {0.5, 0.9, 0.98};
  std::vector<double> epsilons = {1e-5, 1e-8};
  OptimizerKind optimizer = OptimizerKind::kAdam;
  // (offline samples, online forecasts) pairs with online <= offline.
  std::vector<std::pair<std::size_t, std::size_t>> forecast_sizes = {{20, 20}, {50, 20}, {50, 50}};
};

// Expands a grid into controller configs. For the predictive controller,
// forecast_for(b_off, b_on) supplies the forecast table for each size pair.
std::vector<ControllerConfig> expand_grid(
    ControllerKind kind, const TuningGrid& grid,
    const std::function<ProgressToGoTable(std::size_t, std::size_t)>& forecast_for = {});

}  // namespace rankctl
