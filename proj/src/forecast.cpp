#include "rankctl/forecast.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <optional>
#include <map>
#include <random>
#include <sstream>

namespace rankctl {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidInput(what);
}

int preset_label(StrataKey key, int t, int index, int size) {
  switch (key) {
    case StrataKey::kUniform: return 0;
    case StrataKey::kHourOfDay: return (t - 1) % 24;
    case StrataKey::kDayOfWeek: return ((t - 1) / 24) % 7;
    case StrataKey::kHalves: return index < size / 2 ? 0 : 1;
  }
  return 0;
}

}  // namespace

std::string to_string(StrataKey key) {
  switch (key) {
    case StrataKey::kUniform: return "uniform";
    case StrataKey::kHourOfDay: return "hour_of_day";
    case StrataKey::kDayOfWeek: return "day_of_week";
    case StrataKey::kHalves: return "halves";
  }
  return "unknown";
}

StrataKey parse_strata_key(const std::string& name) {
  for (auto k : {StrataKey::kUniform, StrataKey::kHourOfDay, StrataKey::kDayOfWeek, StrataKey::kHalves}) {
    if (to_string(k) == name) return k;
  }
  throw InvalidInput("unknown strata key '" + name + "'");
}

std::vector<int> strata_labels(StrataKey key, const ContextStream& stream) {
  const bool explicit_labels =
      !stream.strata.empty() && (key == StrataKey::kHourOfDay || key == StrataKey::kDayOfWeek);
  if (explicit_labels) return stream.strata;
  std::vector<int> out;
  const int size = stream.horizon();
  for (int i = 0; i < size; ++i) out.push_back(preset_label(key, stream.contexts[static_cast<std::size_t>(i)].t, i, size));
  return out;
}

std::vector<int> timeline_labels(StrataKey key, int horizon) {
  std::vector<int> out;
  for (int i = 0; i < horizon; ++i) out.push_back(preset_label(key, i + 1, i, horizon));
  return out;
}

ForecastPlan stratified_bootstrap(const ContextStream& dataset, std::span<const int> timeline_strata,
                                  std::size_t num_samples, StrataKey key, std::uint64_t seed) {
  dataset.validate();
  require(num_samples >= 1, "bootstrap: at least one sample required");
  require(!timeline_strata.empty(), "bootstrap: empty timeline");
  std::map<int, std::vector<std::size_t>> members;
  const auto labels = strata_labels(key, dataset);
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(i);
  for (int label : timeline_strata) {
    if (!members.count(label)) {
      throw InvalidInput("bootstrap: stratum " + std::to_string(label) + " (" + to_string(key) +
                         ") has no contexts in the dataset");
    }
  }
  std::mt19937_64 rng(seed);
  ForecastPlan plan;
  plan.strata = key;
  plan.index_sequences.resize(num_samples);
  for (auto& seq : plan.index_sequences) {
    seq.reserve(timeline_strata.size());
    for (int label : timeline_strata) {
      const auto& pool = members[label];
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      seq.push_back(pool[pick(rng)]);
    }
  }
  return plan;
}

ForecastPlan stratified_bootstrap(const ContextStream& dataset, int horizon, std::size_t num_samples,
                                  StrataKey key, std::uint64_t seed) {
  const auto labels = timeline_labels(key, horizon);
  return stratified_bootstrap(dataset, labels, num_samples, key, seed);
}

OfflinePolicy fit_offline_policy(const ForecastPlan& plan, const ContextStream& dataset,
                                 const InterventionSpec& spec, const HorizonOptions& options) {
  dataset.validate();
  spec.validate();
  require(plan.num_samples() >= 1, "offline fit: empty plan");
  std::map<std::size_t, std::size_t> slot_of_index;
  HorizonProblem problem;
  problem.num_samples = plan.num_samples();
  problem.tau = spec.tau;
  problem.phi = spec.phi;
  problem.weights = spec.weights;
  for (std::size_t b = 0; b < plan.num_samples(); ++b) {
    require(static_cast<int>(plan.index_sequences[b].size()) == plan.horizon(), "offline fit: ragged plan");
    for (std::size_t j : plan.index_sequences[b]) {
      require(j < dataset.contexts.size(), "offline fit: index " + std::to_string(j) + " outside dataset");
      auto [it, inserted] = slot_of_index.try_emplace(j, slot_of_index.size());
      problem.terms.push_back({dataset.contexts[j], 1.0, it->second, b});
    }
  }
  problem.num_slots = slot_of_index.size();
  HorizonSolution sol = solve_horizon_lp(problem, options);
  OfflinePolicy out;
  out.objective = sol.objective;
  for (const auto& [index, slot] : slot_of_index) out.by_index.emplace(index, sol.policies[slot]);
  return out;
}

ProgressToGoTable progress_to_go(const OfflinePolicy& policy, const ForecastPlan& plan,
                                 const ContextStream& dataset, const InterventionSpec& spec,
                                 std::size_t num_forecasts) {
  require(num_forecasts >= 1 && num_forecasts <= plan.num_samples(),
          "progress_to_go: need 1 <= online forecasts <= offline samples");
  const auto m = static_cast<Eigen::Index>(spec.num_constraints());
  ProgressToGoTable table;
  for (std::size_t b = 0; b < num_forecasts; ++b) {
    const auto& seq = plan.index_sequences[b];
    std::vector<Vector> to_go(seq.size(), Vector::Zero(m));
    Vector acc = Vector::Zero(m);
    for (std::size_t t = seq.size(); t-- > 0;) {
      to_go[t] = acc;
      const auto found = policy.by_index.find(seq[t]);
      require(found != policy.by_index.end(), "progress_to_go: no policy for dataset index " + std::to_string(seq[t]));
      acc += progress(dataset.contexts[seq[t]], found->second, spec.weights);
    }
    table.values.push_back(std::move(to_go));
  }
  return table;
}

ProgressToGoTable progress_to_go_from_plan(std::span<const RankingPolicy> plan, const ContextStream& stream,
                                           const InterventionSpec& spec, std::size_t num_forecasts) {
  require(plan.size() == stream.contexts.size(), "progress_to_go: plan and stream lengths differ");
  require(num_forecasts >= 1, "progress_to_go: at least one forecast required");
  const auto m = static_cast<Eigen::Index>(spec.num_constraints());
  std::vector<Vector> to_go(plan.size(), Vector::Zero(m));
  Vector acc = Vector::Zero(m);
  for (std::size_t t = plan.size(); t-- > 0;) {
    to_go[t] = acc;
    acc += progress(stream.contexts[t], plan[t], spec.weights);
  }
  ProgressToGoTable table;
  table.values.assign(num_forecasts, to_go);
  return table;
}

void write_progress_to_go(const ProgressToGoTable& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string() + ": cannot write file");
  out << "b,t,constraint_index,value\n";
  for (std::size_t b = 0; b < table.values.size(); ++b) {
    for (std::size_t t = 0; t < table.values[b].size(); ++t) {
      const Vector& v = table.values[b][t];
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        out << (b + 1) << ',' << (t + 1) << ',' << (i + 1) << ',' << format_double(v[i]) << '\n';
      }
    }
  }
  if (!out) throw DataError(path.string() + ": write failed");
}

ProgressToGoTable read_progress_to_go(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open file");
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "b,t,constraint_index,value") throw DataError(path.string() + ":1: unexpected header");
  std::map<std::size_t, std::map<std::size_t, std::map<std::size_t, double>>> cells;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::size_t b = 0, t = 0, i = 0;
    double v = 0.0;
    char c1 = 0, c2 = 0, c3 = 0;
    if (!(row >> b >> c1 >> t >> c2 >> i >> c3 >> v) || c1 != ',' || c2 != ',' || c3 != ',' || b < 1 || t < 1 || i < 1) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": malformed row");
    }
    cells[b][t][i] = v;
  }
  ProgressToGoTable table;
  for (const auto& [b, by_t] : cells) {
    if (b != table.values.size() + 1) throw DataError(path.string() + ": forecasts are not numbered 1..B");
    std::vector<Vector> seq;
    for (const auto& [t, by_i] : by_t) {
      if (t != seq.size() + 1) throw DataError(path.string() + ": steps are not numbered 1..T");
      Vector v(static_cast<Eigen::Index>(by_i.size()));
      for (const auto& [i, value] : by_i) v[static_cast<Eigen::Index>(i - 1)] = value;
      seq.push_back(std::move(v));
    }
    table.values.push_back(std::move(seq));
  }
  return table;
}

TuningResult tune_gain(const ContextStream& dev_stream, std::span<const ControllerConfig> grid,
                       const InterventionSpec& spec, const TuningOptions& options) {
  require(!grid.empty(), "tune_gain: empty grid");
  require(options.realized_episodes >= 1, "tune_gain: realized_episodes must be >= 1");
  TuningResult result;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    double score = 0.0;
    if (options.mode == ProgressMode::kExpected) {
      Controller controller(grid[g], spec);
      score = run_episode(controller, dev_stream, spec, ProgressMode::kExpected, options.seed).objective;
    } else {
      std::vector<double> scores;
      for (int k = 0; k < options.realized_episodes; ++k) {
        Controller controller(grid[g], spec);
        scores.push_back(run_episode(controller, dev_stream, spec, ProgressMode::kRealized,
                                     options.seed + static_cast<std::uint64_t>(k)).objective);
      }
      std::sort(scores.begin(), scores.end());
      const std::size_t mid = scores.size() / 2;
      score = scores.size() % 2 ? scores[mid] : 0.5 * (scores[mid - 1] + scores[mid]);
    }
    result.log.push_back({g, grid[g], score});
    if (score >= best) {
      best = score;
      result.best_index = g;
    }
  }
  result.best = grid[result.best_index];
  result.best_objective = best;
  return result;
}

std::vector<ControllerConfig> expand_grid(
    ControllerKind kind, const TuningGrid& grid,
    const std::function<ProgressToGoTable(std::size_t, std::size_t)>& forecast_for) {
  std::vector<ControllerConfig> out;
  auto base = [&](double gain) {
    ControllerConfig cfg;
    cfg.kind = kind;
    cfg.gain = gain;
    cfg.optimizer.kind = grid.optimizer;
    return cfg;
  };
  switch (kind) {
    case ControllerKind::kMyopic:
    case ControllerKind::kOracle:
    case ControllerKind::kUnconstrained:
      out.push_back(base(1.0));
      return out;
    case ControllerKind::kPControl:
      for (double g : grid.gains) out.push_back(base(g));
      return out;
    case ControllerKind::kStationary:
    case ControllerKind::kPredictive:
      break;
  }
  std::vector<std::pair<std::size_t, std::size_t>> sizes = {{0, 0}};
  if (kind == ControllerKind::kPredictive) {
    require(static_cast<bool>(forecast_for), "expand_grid: predictive grid needs a forecast source");
    sizes = grid.forecast_sizes;
  }
  std::vector<std::pair<double, double>> moments = {{0.9, 1e-8}};
  if (grid.optimizer == OptimizerKind::kAdam) {
    moments.clear();
    for (double b : grid.betas) {
      for (double e : grid.epsilons) moments.emplace_back(b, e);
    }
  }
  for (const auto& [b_off, b_on] : sizes) {
    std::optional<ProgressToGoTable> table;
    if (kind == ControllerKind::kPredictive) {
      require(b_on >= 1 && b_on <= b_off, "expand_grid: forecast sizes need 1 <= online <= offline");
      table = forecast_for(b_off, b_on);
    }
    for (double g : grid.gains) {
      for (const auto& [beta, eps] : moments) {
        ControllerConfig cfg = base(g);
        cfg.optimizer.beta = beta;
        cfg.optimizer.epsilon = eps;
        cfg.forecasts = table;
        cfg.offline_samples = b_off;
        out.push_back(std::move(cfg));
      }
    }
  }
  return out;
}

}  // namespace rankctl
