#pragma once

// The closed control loop, context streams (synthetic and CSV), baseline
// targets and train/dev/test splitting.

#include "rankctl/controllers.hpp"
#include "rankctl/core.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace rankctl {

// Malformed dataset files; the message names the file and line.
class DataError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

struct ContextStream {
  std::vector<Context> contexts;
  std::vector<int> strata;  // empty, or one label per context

  int horizon() const { return static_cast<int>(contexts.size()); }
  std::size_t num_items() const { return contexts.empty() ? 0 : contexts.front().num_items(); }
  std::size_t num_constraints() const { return contexts.empty() ? 0 : contexts.front().num_constraints(); }

  // Uniform dimensions, T >= 1, strata empty or aligned.
  void validate() const;
  // Contexts [begin, end); original time indices are kept.
  ContextStream slice(std::size_t begin, std::size_t end) const;
};

struct EpisodeResult {
  std::string controller;
  std::vector<double> utilities;
  std::vector<Vector> progress;
  std::vector<Permutation> sampled;  // realized mode only
  std::vector<Matrix> multipliers;   // stored multipliers after each step
  ProgressState terminal;
  double violation = 0.0;
  double objective = 0.0;

  double total_utility() const;
};

// Observe, select, (sample), accumulate; objective is sum utility - violation.
// The oracle controller is planned on the stream first if it has no plan.
EpisodeResult run_episode(Controller& controller, const ContextStream& stream, const InterventionSpec& spec,
                          ProgressMode mode, std::uint64_t seed);

// Seed for the BvN draw at step t of an episode.
std::uint64_t step_seed(std::uint64_t seed, int t);

struct SyntheticSpec {
  std::size_t n_items = 8;
  int horizon = 400;
  std::vector<std::size_t> group_one = {4, 5};  // 0-based items, relevant in the first half
  std::vector<std::size_t> group_two = {6, 7};  // relevant in the second half
  double constant_relevance = 1.0;
  double in_season = 0.8;
  double off_season = 0.05;
  double noise = 0.0;  // uniform jitter amplitude on group items (seeded)
  std::size_t cutoff_k = 4;

  void validate() const;
};

// Two-group seasonal stream; W is the 2 x n group indicator. Strata label the
// two halves (0, 1).
ContextStream generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

// Long-format CSVs:
//   contexts: t,item_id,relevance[,stratum]   (1-based t and item ids)
//   groups:   constraint_id,item_id,weight     (static W across steps)
ContextStream load_csv(const std::filesystem::path& contexts_path, const std::filesystem::path& groups_path);
void write_csv(const ContextStream& stream, const std::filesystem::path& contexts_path,
               const std::filesystem::path& groups_path);

// Shortest round-trip decimal representation.
std::string format_double(double x);

// tau = factor (.) exposure collected by the unconstrained controller.
Vector target_from_baseline(const ContextStream& stream, const PositionWeights& weights, const Vector& factors);

struct SplitRatios {
  double train = 0.6;
  double dev = 0.2;
  double test = 0.2;
};

struct StreamSplits {
  ContextStream train, dev, test;
};

// Chronological contiguous splits.
StreamSplits split_stream(const ContextStream& stream, const SplitRatios& ratios);

}  // namespace rankctl
