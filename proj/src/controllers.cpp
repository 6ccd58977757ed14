#include "rankctl/controllers.hpp"

#include <json.hpp>

#include <cmath>
#include <stdexcept>

namespace rankctl {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidInput(what);
}

void check_step(const Context& ctx, int t, const InterventionSpec& spec, const ProgressState& state) {
  require(t >= 1 && t <= spec.horizon, "step " + std::to_string(t) + " outside [1, " + std::to_string(spec.horizon) + "]");
  require(ctx.num_items() == spec.weights.size(), "context/weights item count mismatch");
  require(ctx.num_constraints() == spec.num_constraints() && state.s.size() == spec.tau.size(),
          "context/spec constraint count mismatch");
}

Matrix to_matrix(const nlohmann::json& rows) {
  if (rows.empty()) return Matrix();
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = static_cast<Eigen::Index>(rows.at(0).size());
  Matrix out(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    require(static_cast<Eigen::Index>(rows.at(static_cast<std::size_t>(i)).size()) == c, "snapshot: ragged matrix");
    for (Eigen::Index j = 0; j < c; ++j) out(i, j) = rows.at(static_cast<std::size_t>(i)).at(static_cast<std::size_t>(j)).get<double>();
  }
  return out;
}

nlohmann::json to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::string to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::kMyopic: return "myopic";
    case ControllerKind::kStationary: return "stationary";
    case ControllerKind::kPredictive: return "predictive";
    case ControllerKind::kPControl: return "p_control";
    case ControllerKind::kOracle: return "oracle";
    case ControllerKind::kUnconstrained: return "unconstrained";
  }
  return "unknown";
}

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::kOgd ? "ogd" : "adam"; }

std::string to_string(ProgressMode mode) { return mode == ProgressMode::kExpected ? "expected" : "realized"; }

ControllerKind parse_controller_kind(const std::string& name) {
  for (auto k : {ControllerKind::kMyopic, ControllerKind::kStationary, ControllerKind::kPredictive,
                 ControllerKind::kPControl, ControllerKind::kOracle, ControllerKind::kUnconstrained}) {
    if (to_string(k) == name) return k;
  }
  throw InvalidInput("unknown controller kind '" + name + "'");
}

OptimizerKind parse_optimizer_kind(const std::string& name) {
  if (name == "ogd") return OptimizerKind::kOgd;
  if (name == "adam") return OptimizerKind::kAdam;
  throw InvalidInput("unknown optimizer '" + name + "'");
}

ProgressMode parse_progress_mode(const std::string& name) {
  if (name == "expected") return ProgressMode::kExpected;
  if (name == "realized") return ProgressMode::kRealized;
  throw InvalidInput("unknown progress mode '" + name + "'");
}

void ControllerConfig::validate() const {
  const bool gained = kind == ControllerKind::kStationary || kind == ControllerKind::kPredictive ||
                      kind == ControllerKind::kPControl;
  if (gained) require(std::isfinite(gain) && gain > 0.0, to_string(kind) + " controller requires gain > 0");
  if (kind == ControllerKind::kPredictive) {
    require(forecasts.has_value() && forecasts->num_forecasts() >= 1, "predictive controller requires forecasts");
  }
  if (optimizer.kind == OptimizerKind::kAdam) {
    require(optimizer.beta > 0.0 && optimizer.beta < 1.0, "adam beta must lie in (0, 1)");
    require(optimizer.epsilon > 0.0, "adam epsilon must be > 0");
  }
}

MultiplierState MultiplierState::zero(std::size_t rows, std::size_t m) {
  const auto r = static_cast<Eigen::Index>(rows), c = static_cast<Eigen::Index>(m);
  return {Matrix::Zero(r, c), Matrix::Zero(r, c), Matrix::Zero(r, c), 0};
}

MultiplierState ogd_update(const MultiplierState& st, const Matrix& grad, double gain) {
  require(grad.rows() == st.lambda.rows() && grad.cols() == st.lambda.cols(), "ogd_update: shape mismatch");
  MultiplierState next = st;
  next.lambda -= gain * grad;
  ++next.step;
  return next;
}

MultiplierState adam_update(const MultiplierState& st, const Matrix& grad, double gain, double beta,
                            double epsilon) {
  require(grad.rows() == st.lambda.rows() && grad.cols() == st.lambda.cols(), "adam_update: shape mismatch");
  require(beta > 0.0 && beta < 1.0 && epsilon > 0.0, "adam_update: beta in (0,1) and epsilon > 0 required");
  MultiplierState next = st;
  ++next.step;
  next.first_moment = beta * st.first_moment + (1.0 - beta) * grad;
  // Standard Adam: the second moment accumulates +(1 - beta) g^2.
  next.second_moment = beta * st.second_moment + (1.0 - beta) * grad.cwiseProduct(grad);
  const double correction = 1.0 - std::pow(beta, next.step);
  const Matrix m_hat = next.first_moment / correction;
  const Matrix v_hat = next.second_moment / correction;
  next.lambda -= gain * m_hat.cwiseQuotient((v_hat.array() + epsilon).sqrt().matrix());
  return next;
}

MultiplierState apply_update(const MultiplierState& st, const Matrix& grad, double gain,
                             const OptimizerConfig& opt) {
  if (opt.kind == OptimizerKind::kAdam) return adam_update(st, grad, gain, opt.beta, opt.epsilon);
  return ogd_update(st, grad, gain);
}

RankingPolicy myopic_select(const Context& ctx, const ProgressState& state, int t,
                            const InterventionSpec& spec) {
  check_step(ctx, t, spec, state);
  HingeProgram prog;
  prog.score = linear_score(ctx.relevance, Vector::Zero(ctx.relevance.size()), spec.weights);
  prog.targets = (static_cast<double>(t) / spec.horizon) * spec.tau - state.s;
  prog.costs = spec.phi;
  prog.groups = ctx.groups;
  prog.exposure = spec.weights.e;
  return solve_hinge_lp(prog).policy;
}

std::pair<RankingPolicy, MultiplierState> stationary_select(const Context& ctx, const ProgressState& state,
                                                            int t, const InterventionSpec& spec,
                                                            const MultiplierState& mult, double gain,
                                                            const OptimizerConfig& opt) {
  check_step(ctx, t, spec, state);
  require(mult.lambda.rows() == 1 && mult.lambda.cols() == spec.tau.size(), "stationary: multiplier shape");
  const Vector used = clip(mult.lambda.row(0).transpose(), spec.phi);
  const Matrix score = linear_score(ctx.relevance, ctx.groups.transpose() * used, spec.weights);
  RankingPolicy policy = solve_assignment(score).to_policy();
  const Vector step_progress = progress(ctx, policy, spec.weights);
  const Matrix grad = (step_progress - spec.tau / spec.horizon).transpose();
  return {std::move(policy), apply_update(mult, grad, gain, opt)};
}

Permutation p_control_select(const Context& ctx, const ProgressState& state, int t,
                             const InterventionSpec& spec, double gain) {
  check_step(ctx, t, spec, state);
  const Vector tracking = (static_cast<double>(t - 1) / spec.horizon) * spec.tau - state.s;
  const Vector boost = clip(gain * tracking, spec.phi);
  return argsort_descending(ctx.relevance + ctx.groups.transpose() * boost);
}

std::pair<RankingPolicy, MultiplierState> predictive_select(const Context& ctx, const ProgressState& state,
                                                            int t, const InterventionSpec& spec,
                                                            const MultiplierState& mult,
                                                            const ProgressToGoTable& forecasts, double gain,
                                                            const OptimizerConfig& opt) {
  check_step(ctx, t, spec, state);
  const auto nb = static_cast<Eigen::Index>(forecasts.num_forecasts());
  require(nb >= 1, "predictive: no forecasts");
  require(mult.lambda.rows() == nb && mult.lambda.cols() == spec.tau.size(), "predictive: multiplier shape");
  Vector avg = Vector::Zero(spec.tau.size());
  for (Eigen::Index b = 0; b < nb; ++b) avg += clip(mult.lambda.row(b).transpose(), spec.phi);
  avg /= static_cast<double>(nb);
  const Matrix score = linear_score(ctx.relevance, ctx.groups.transpose() * avg, spec.weights);
  RankingPolicy policy = solve_assignment(score).to_policy();
  const Vector step_progress = progress(ctx, policy, spec.weights);
  Matrix grad(nb, spec.tau.size());
  for (Eigen::Index b = 0; b < nb; ++b) {
    const auto& seq = forecasts.values[static_cast<std::size_t>(b)];
    if (static_cast<std::size_t>(t) > seq.size()) {
      throw InvalidInput("predictive: forecast " + std::to_string(b) + " has no entry for t=" + std::to_string(t));
    }
    const Vector& to_go = seq[static_cast<std::size_t>(t - 1)];
    require(to_go.size() == spec.tau.size(), "predictive: forecast length mismatch");
    grad.row(b) = -(spec.tau - state.s - step_progress - to_go).transpose();
  }
  return {std::move(policy), apply_update(mult, grad, gain, opt)};
}

Permutation unconstrained_select(const Context& ctx) { return argsort_descending(ctx.relevance); }

OraclePlan oracle_plan(std::span<const Context> contexts, const InterventionSpec& spec) {
  spec.validate();
  HorizonSolution sol = solve_horizon_lp(contexts, {}, spec);
  return {std::move(sol.policies), sol.objective};
}

Controller::Controller(ControllerConfig config, InterventionSpec spec)
    : config_(std::move(config)), spec_(std::move(spec)) {
  config_.validate();
  spec_.validate();
  reset();
}

void Controller::reset() {
  const std::size_t rows = config_.kind == ControllerKind::kPredictive ? config_.forecasts->num_forecasts() : 1;
  mult_ = MultiplierState::zero(rows, spec_.num_constraints());
}

RankingPolicy Controller::select(const Context& ctx, const ProgressState& state, int t) {
  switch (config_.kind) {
    case ControllerKind::kMyopic:
      return myopic_select(ctx, state, t, spec_);
    case ControllerKind::kStationary: {
      auto [policy, next] = stationary_select(ctx, state, t, spec_, mult_, config_.gain, config_.optimizer);
      mult_ = std::move(next);
      return policy;
    }
    case ControllerKind::kPredictive: {
      auto [policy, next] =
          predictive_select(ctx, state, t, spec_, mult_, *config_.forecasts, config_.gain, config_.optimizer);
      mult_ = std::move(next);
      return policy;
    }
    case ControllerKind::kPControl:
      return p_control_select(ctx, state, t, spec_, config_.gain).to_policy();
    case ControllerKind::kOracle:
      if (static_cast<std::size_t>(t) > plan_.size()) {
        throw InvalidInput("oracle controller has no plan for t=" + std::to_string(t));
      }
      return plan_[static_cast<std::size_t>(t - 1)];
    case ControllerKind::kUnconstrained:
      return unconstrained_select(ctx).to_policy();
  }
  throw InvalidInput("unhandled controller kind");
}

std::string Controller::snapshot() const {
  nlohmann::json j;
  j["kind"] = to_string(config_.kind);
  j["step"] = mult_.step;
  j["lambda"] = to_json(mult_.lambda);
  j["first_moment"] = to_json(mult_.first_moment);
  j["second_moment"] = to_json(mult_.second_moment);
  return j.dump();
}

void Controller::restore(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("snapshot: ") + e.what());
  }
  require(j.value("kind", std::string()) == to_string(config_.kind), "snapshot: controller kind mismatch");
  MultiplierState st;
  st.step = j.at("step").get<int>();
  st.lambda = to_matrix(j.at("lambda"));
  st.first_moment = to_matrix(j.at("first_moment"));
  st.second_moment = to_matrix(j.at("second_moment"));
  require(st.lambda.rows() == mult_.lambda.rows() && st.lambda.cols() == mult_.lambda.cols(),
          "snapshot: multiplier shape mismatch");
  require(st.first_moment.rows() == st.lambda.rows() && st.second_moment.rows() == st.lambda.rows(),
          "snapshot: moment shape mismatch");
  mult_ = std::move(st);
}

}  // namespace rankctl
