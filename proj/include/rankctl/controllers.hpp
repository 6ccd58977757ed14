#pragma once

// Closed-loop ranking controllers Pi(x_t, s_{t-1}, t).
//
// Multiplier sign convention: the stored multipliers grow when progress lags
// the target. Updates are written as descent steps lambda <- lambda - gain * g
// with g the negated tracking gradient, e.g. g = W Sigma_t e - tau / T for the
// stationary controller, so with plain OGD lambda_t = gain * ((t/T) tau - s_t).
// Multipliers enter every argmax clipped to [0, phi]; the stored values are
// never clipped.

#include "rankctl/bvn.hpp"
#include "rankctl/core.hpp"
#include "rankctl/solver.hpp"

#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace rankctl {

enum class ControllerKind { kMyopic, kStationary, kPredictive, kPControl, kOracle, kUnconstrained };
enum class OptimizerKind { kOgd, kAdam };
enum class ProgressMode { kRealized, kExpected };

std::string to_string(ControllerKind kind);
std::string to_string(OptimizerKind kind);
std::string to_string(ProgressMode mode);
ControllerKind parse_controller_kind(const std::string& name);
OptimizerKind parse_optimizer_kind(const std::string& name);
ProgressMode parse_progress_mode(const std::string& name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kOgd;
  double beta = 0.9;
  double epsilon = 1e-8;
};

// Forecast progress-to-go: values[b][t - 1] is C_hat_t^b (length m).
struct ProgressToGoTable {
  std::vector<std::vector<Vector>> values;

  std::size_t num_forecasts() const { return values.size(); }
  std::size_t horizon() const { return values.empty() ? 0 : values.front().size(); }
};

struct ControllerConfig {
  ControllerKind kind = ControllerKind::kUnconstrained;
  double gain = 1.0;
  OptimizerConfig optimizer;
  std::optional<ProgressToGoTable> forecasts;
  std::size_t offline_samples = 0;  // bootstrap size behind the forecasts, for reporting
  ProgressMode progress_mode = ProgressMode::kExpected;

  // predictive needs forecasts; stationary / predictive / p_control need gain > 0.
  void validate() const;
};

struct MultiplierState {
  Matrix lambda;         // B x m (B = 1 except for the predictive controller)
  Matrix first_moment;   // Adam m_t
  Matrix second_moment;  // Adam v_t
  int step = 0;

  static MultiplierState zero(std::size_t rows, std::size_t m);
};

MultiplierState ogd_update(const MultiplierState& st, const Matrix& grad, double gain);
MultiplierState adam_update(const MultiplierState& st, const Matrix& grad, double gain, double beta,
                            double epsilon);
MultiplierState apply_update(const MultiplierState& st, const Matrix& grad, double gain,
                             const OptimizerConfig& opt);

RankingPolicy myopic_select(const Context& ctx, const ProgressState& state, int t,
                            const InterventionSpec& spec);

std::pair<RankingPolicy, MultiplierState> stationary_select(const Context& ctx, const ProgressState& state,
                                                            int t, const InterventionSpec& spec,
                                                            const MultiplierState& mult, double gain,
                                                            const OptimizerConfig& opt);

// argsort of r + W^T clip(gain * ((t-1)/T tau - s_{t-1}), 0, phi).
Permutation p_control_select(const Context& ctx, const ProgressState& state, int t,
                             const InterventionSpec& spec, double gain);

std::pair<RankingPolicy, MultiplierState> predictive_select(const Context& ctx, const ProgressState& state,
                                                            int t, const InterventionSpec& spec,
                                                            const MultiplierState& mult,
                                                            const ProgressToGoTable& forecasts, double gain,
                                                            const OptimizerConfig& opt);

Permutation unconstrained_select(const Context& ctx);

struct OraclePlan {
  std::vector<RankingPolicy> policies;
  double objective = 0.0;
};

// Full-information skyline: one horizon-LP slot per step.
OraclePlan oracle_plan(std::span<const Context> contexts, const InterventionSpec& spec);

// Stateful wrapper used by the episode loop.
class Controller {
 public:
  Controller(ControllerConfig config, InterventionSpec spec);

  const ControllerConfig& config() const { return config_; }
  const MultiplierState& multipliers() const { return mult_; }

  // Clears multipliers (the oracle plan is kept).
  void reset();
  bool needs_plan() const { return config_.kind == ControllerKind::kOracle && plan_.empty(); }
  void set_plan(std::vector<RankingPolicy> plan) { plan_ = std::move(plan); }

  // Chooses Sigma_t and advances internal multipliers.
  RankingPolicy select(const Context& ctx, const ProgressState& state, int t);

  // JSON snapshot: kind, lambda rows, moments, step counter.
  std::string snapshot() const;
  void restore(const std::string& json_text);

 private:
  ControllerConfig config_;
  InterventionSpec spec_;
  MultiplierState mult_;
  std::vector<RankingPolicy> plan_;
};

}  // namespace rankctl
