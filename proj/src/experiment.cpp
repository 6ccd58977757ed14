#include "rankctl/experiment.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

namespace rankctl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw ConfigError("config field '" + field + "': " + what);
}

// Typed access to one JSON object; unknown keys are rejected.
class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) fail(path_.empty() ? "<root>" : path_, "expected an object");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const {
    seen_.insert(key);
    return node_.contains(key) && !node_.at(key).is_null();
  }
  const json& at(const std::string& key) const {
    seen_.insert(key);
    return node_.at(key);
  }
  Section child(const std::string& key) const { return Section(at(key), field(key)); }

  double number(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_number()) fail(field(key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(field(key), "must be finite");
    return x;
  }
  std::int64_t integer(const std::string& key, std::int64_t fallback) const {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_number_integer()) fail(field(key), "expected an integer");
    return v.get<std::int64_t>();
  }
  std::size_t count(const std::string& key, std::size_t fallback) const {
    const auto v = integer(key, static_cast<std::int64_t>(fallback));
    if (v < 0) fail(field(key), "must be >= 0");
    return static_cast<std::size_t>(v);
  }
  std::string text(const std::string& key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_string()) fail(field(key), "expected a string");
    return v.get<std::string>();
  }
  bool flag(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_boolean()) fail(field(key), "expected true or false");
    return v.get<bool>();
  }
  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) const {
    if (!has(key)) return fallback;
    const json& v = at(key);
    std::vector<double> out;
    if (v.is_number()) {
      out.push_back(v.get<double>());
    } else if (v.is_array()) {
      for (const auto& x : v) {
        if (!x.is_number()) fail(field(key), "expected an array of numbers");
        out.push_back(x.get<double>());
      }
    } else {
      fail(field(key), "expected a number or an array of numbers");
    }
    for (double x : out) {
      if (!std::isfinite(x)) fail(field(key), "must be finite");
    }
    return out;
  }
  std::vector<std::size_t> indices(const std::string& key, std::vector<std::size_t> fallback) const {
    if (!has(key)) return fallback;
    const json& v = at(key);
    if (!v.is_array()) fail(field(key), "expected an array of item ids");
    std::vector<std::size_t> out;
    for (const auto& x : v) {
      if (!x.is_number_integer() || x.get<std::int64_t>() < 1) fail(field(key), "item ids are integers >= 1");
      out.push_back(static_cast<std::size_t>(x.get<std::int64_t>() - 1));
    }
    return out;
  }

  void reject_unknown() const {
    for (const auto& [key, value] : node_.items()) {
      if (!seen_.count(key)) fail(field(key), "unknown field");
    }
  }

 private:
  const json& node_;
  std::string path_;
  mutable std::set<std::string> seen_;
};

template <typename Parse>
auto parse_enum(const Section& s, const std::string& key, const std::string& fallback, Parse parse) {
  const std::string name = s.text(key, fallback);
  try {
    return parse(name);
  } catch (const InvalidInput& e) {
    fail(s.field(key), e.what());
  }
}

std::vector<std::size_t> to_one_based(const std::vector<std::size_t>& items) {
  std::vector<std::size_t> out;
  for (auto j : items) out.push_back(j + 1);
  return out;
}

json canonical_json(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["progress_mode"] = to_string(c.progress_mode);
  json d;
  d["source"] = c.dataset.source;
  if (c.dataset.source == "synthetic") {
    const auto& s = c.dataset.synthetic;
    d["synthetic"] = {{"n_items", s.n_items},
                      {"horizon", s.horizon},
                      {"group_one", to_one_based(s.group_one)},
                      {"group_two", to_one_based(s.group_two)},
                      {"constant_relevance", s.constant_relevance},
                      {"in_season", s.in_season},
                      {"off_season", s.off_season},
                      {"noise", s.noise},
                      {"cutoff_k", s.cutoff_k}};
  } else {
    d["contexts"] = c.dataset.contexts.generic_string();
    d["groups"] = c.dataset.groups.generic_string();
  }
  j["dataset"] = d;
  j["split"] = {{"mode", c.split.mode},
                {"train", c.split.ratios.train},
                {"dev", c.split.ratios.dev},
                {"test", c.split.ratios.test}};
  json iv;
  if (c.intervention.tau) iv["tau"] = *c.intervention.tau;
  if (c.intervention.baseline_factors) iv["baseline_factors"] = *c.intervention.baseline_factors;
  iv["phi"] = c.intervention.phi;
  iv["phi_grid"] = c.intervention.phi_grid;
  iv["utility_metric"] = c.intervention.utility_metric;
  iv["exposure_metric"] = c.intervention.exposure_metric;
  iv["cutoff_k"] = c.intervention.cutoff_k ? json(*c.intervention.cutoff_k) : json(nullptr);
  j["intervention"] = iv;
  json cs = json::array();
  for (const auto& e : c.controllers) {
    cs.push_back({{"kind", to_string(e.config.kind)},
                  {"gain", e.config.gain},
                  {"optimizer", to_string(e.config.optimizer.kind)},
                  {"beta", e.config.optimizer.beta},
                  {"epsilon", e.config.optimizer.epsilon},
                  {"offline_samples", e.config.offline_samples},
                  {"online_forecasts", e.online_forecasts}});
  }
  j["controllers"] = cs;
  j["forecast"] = {{"source", c.forecast.source},
                   {"offline_samples", c.forecast.offline_samples},
                   {"online_forecasts", c.forecast.online_forecasts},
                   {"strata", to_string(c.forecast.strata)}};
  json sizes = json::array();
  for (const auto& [off, on] : c.tuning.grid.forecast_sizes) sizes.push_back({off, on});
  j["tuning"] = {{"enabled", c.tuning.enabled},
                 {"gains", c.tuning.grid.gains},
                 {"betas", c.tuning.grid.betas},
                 {"epsilons", c.tuning.grid.epsilons},
                 {"optimizer", to_string(c.tuning.grid.optimizer)},
                 {"forecast_sizes", sizes},
                 {"progress_mode", to_string(c.tuning.mode)},
                 {"realized_episodes", c.tuning.realized_episodes}};
  return j;
}

void apply_overrides(ExperimentConfig& c, const CommandOverrides& o) {
  if (o.seed) c.seed = *o.seed;
  if (o.progress_mode) c.progress_mode = *o.progress_mode;
  if (o.workers) c.workers = *o.workers;
  if (o.output_dir) c.output_dir = *o.output_dir;
  if (c.workers == 0) fail("workers", "must be >= 1");
}

std::vector<ControllerEntry> default_controllers() {
  std::vector<ControllerEntry> out;
  for (auto kind : {ControllerKind::kUnconstrained, ControllerKind::kMyopic, ControllerKind::kStationary,
                    ControllerKind::kPredictive, ControllerKind::kOracle}) {
    ControllerEntry e;
    e.config.kind = kind;
    out.push_back(e);
  }
  return out;
}

void validate(const ExperimentConfig& c) {
  const auto& iv = c.intervention;
  if (iv.tau.has_value() == iv.baseline_factors.has_value()) {
    fail("intervention", "exactly one of 'tau' or 'baseline_factors' is required");
  }
  if (iv.tau) {
    for (double x : *iv.tau) {
      if (x < 0) fail("intervention.tau", "targets must be >= 0");
    }
  }
  if (iv.baseline_factors) {
    for (double x : *iv.baseline_factors) {
      if (x < 0) fail("intervention.baseline_factors", "factors must be >= 0");
    }
  }
  if (iv.phi.empty()) fail("intervention.phi", "must not be empty");
  for (double x : iv.phi) {
    if (x < 0) fail("intervention.phi", "costs must be >= 0");
  }
  if (iv.phi_grid.empty()) fail("intervention.phi_grid", "must not be empty");
  for (double x : iv.phi_grid) {
    if (x < 0) fail("intervention.phi_grid", "costs must be >= 0");
  }
  for (const auto& [key, value] : {std::pair{"utility_metric", iv.utility_metric}, {"exposure_metric", iv.exposure_metric}}) {
    if (value != "dcg" && value != "rr") fail(std::string("intervention.") + key, "expected 'dcg' or 'rr'");
  }
  if (iv.cutoff_k && *iv.cutoff_k == 0) fail("intervention.cutoff_k", "must be >= 1");
  if (c.dataset.source == "synthetic") {
    try {
      c.dataset.synthetic.validate();
    } catch (const InvalidInput& e) {
      fail("dataset.synthetic", e.what());
    }
  } else if (c.dataset.source == "csv") {
    if (c.dataset.contexts.empty()) fail("dataset.contexts", "required for csv datasets");
    if (c.dataset.groups.empty()) fail("dataset.groups", "required for csv datasets");
    if (!fs::exists(c.dataset.contexts)) fail("dataset.contexts", "file not found: " + c.dataset.contexts.string());
    if (!fs::exists(c.dataset.groups)) fail("dataset.groups", "file not found: " + c.dataset.groups.string());
  } else {
    fail("dataset.source", "expected 'synthetic' or 'csv'");
  }
  if (c.split.mode != "identical" && c.split.mode != "chronological") {
    fail("split.mode", "expected 'identical' or 'chronological'");
  }
  const auto& r = c.split.ratios;
  if (r.train < 0 || r.dev < 0 || r.test < 0 || r.train + r.dev + r.test <= 0) {
    fail("split", "ratios must be >= 0 and not all zero");
  }
  if (c.controllers.empty()) fail("controllers", "at least one controller is required");
  std::set<ControllerKind> kinds;
  for (std::size_t i = 0; i < c.controllers.size(); ++i) {
    const auto& cfg = c.controllers[i].config;
    const std::string field = "controllers[" + std::to_string(i) + "]";
    if (!kinds.insert(cfg.kind).second) fail(field + ".kind", "duplicate controller kind '" + to_string(cfg.kind) + "'");
    if (!(cfg.gain > 0)) fail(field + ".gain", "must be > 0");
    if (!(cfg.optimizer.beta >= 0 && cfg.optimizer.beta < 1)) fail(field + ".beta", "must lie in [0, 1)");
    if (!(cfg.optimizer.epsilon > 0)) fail(field + ".epsilon", "must be > 0");
  }
  if (c.forecast.source != "bootstrap" && c.forecast.source != "exact") {
    fail("forecast.source", "expected 'bootstrap' or 'exact'");
  }
  if (c.forecast.offline_samples < 1) fail("forecast.offline_samples", "must be >= 1");
  if (c.forecast.online_forecasts < 1 || c.forecast.online_forecasts > c.forecast.offline_samples) {
    fail("forecast.online_forecasts", "must lie in [1, offline_samples]");
  }
  const auto& g = c.tuning.grid;
  if (g.gains.empty()) fail("tuning.gains", "must not be empty");
  for (double x : g.gains) {
    if (!(x > 0)) fail("tuning.gains", "gains must be > 0");
  }
  if (g.betas.empty()) fail("tuning.betas", "must not be empty");
  for (double x : g.betas) {
    if (!(x >= 0 && x < 1)) fail("tuning.betas", "betas must lie in [0, 1)");
  }
  if (g.epsilons.empty()) fail("tuning.epsilons", "must not be empty");
  for (double x : g.epsilons) {
    if (!(x > 0)) fail("tuning.epsilons", "epsilons must be > 0");
  }
  for (const auto& [off, on] : g.forecast_sizes) {
    if (on < 1 || on > off) fail("tuning.forecast_sizes", "pairs need 1 <= online <= offline");
  }
  if (c.tuning.realized_episodes < 1) fail("tuning.realized_episodes", "must be >= 1");
}

ExperimentConfig parse_root(const json& root, const CommandOverrides& overrides, const fs::path& base_dir) {
  ExperimentConfig c;
  Section top(root, "");
  c.seed = static_cast<std::uint64_t>(top.integer("seed", 0));
  c.workers = static_cast<unsigned>(top.count("workers", std::max(1u, std::thread::hardware_concurrency())));
  c.progress_mode = parse_enum(top, "progress_mode", "realized", parse_progress_mode);
  c.output_dir = top.text("output_dir", "out");

  if (top.has("dataset")) {
    Section d = top.child("dataset");
    c.dataset.source = d.text("source", "synthetic");
    if (d.has("synthetic")) {
      Section s = d.child("synthetic");
      auto& spec = c.dataset.synthetic;
      spec.n_items = s.count("n_items", spec.n_items);
      spec.horizon = static_cast<int>(s.integer("horizon", spec.horizon));
      spec.group_one = s.indices("group_one", spec.group_one);
      spec.group_two = s.indices("group_two", spec.group_two);
      spec.constant_relevance = s.number("constant_relevance", spec.constant_relevance);
      spec.in_season = s.number("in_season", spec.in_season);
      spec.off_season = s.number("off_season", spec.off_season);
      spec.noise = s.number("noise", spec.noise);
      spec.cutoff_k = s.count("cutoff_k", spec.cutoff_k);
      s.reject_unknown();
    }
    auto resolve = [&](const std::string& key) -> fs::path {
      if (!d.has(key)) return {};
      fs::path p = d.text(key, "");
      return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
    };
    c.dataset.contexts = resolve("contexts");
    c.dataset.groups = resolve("groups");
    d.reject_unknown();
  }
  c.split.mode = c.dataset.source == "synthetic" ? "identical" : "chronological";
  if (top.has("split")) {
    Section s = top.child("split");
    c.split.mode = s.text("mode", c.split.mode);
    c.split.ratios.train = s.number("train", c.split.ratios.train);
    c.split.ratios.dev = s.number("dev", c.split.ratios.dev);
    c.split.ratios.test = s.number("test", c.split.ratios.test);
    s.reject_unknown();
  }
  if (top.has("intervention")) {
    Section s = top.child("intervention");
    if (s.has("tau")) c.intervention.tau = s.numbers("tau", {});
    if (s.has("baseline_factors")) c.intervention.baseline_factors = s.numbers("baseline_factors", {});
    c.intervention.phi = s.numbers("phi", c.intervention.phi);
    c.intervention.phi_grid = s.numbers("phi_grid", c.intervention.phi_grid);
    c.intervention.utility_metric = s.text("utility_metric", c.intervention.utility_metric);
    c.intervention.exposure_metric = s.text("exposure_metric", c.intervention.exposure_metric);
    if (s.has("cutoff_k")) {
      c.intervention.cutoff_k = s.count("cutoff_k", 0);
    } else if (root.contains("intervention") && root["intervention"].contains("cutoff_k")) {
      c.intervention.cutoff_k.reset();  // explicit null disables the cutoff
    }
    s.reject_unknown();
  }
  if (!c.intervention.tau && !c.intervention.baseline_factors && c.dataset.source == "synthetic") {
    c.intervention.tau = std::vector<double>{20.0, 100.0};
  }
  if (top.has("controllers")) {
    const json& list = top.at("controllers");
    if (!list.is_array()) fail("controllers", "expected an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      Section s(list[i], "controllers[" + std::to_string(i) + "]");
      ControllerEntry e;
      if (!s.has("kind")) fail(s.field("kind"), "required");
      e.config.kind = parse_enum(s, "kind", "", parse_controller_kind);
      e.config.gain = s.number("gain", e.config.gain);
      e.config.optimizer.kind = parse_enum(s, "optimizer", "ogd", parse_optimizer_kind);
      e.config.optimizer.beta = s.number("beta", e.config.optimizer.beta);
      e.config.optimizer.epsilon = s.number("epsilon", e.config.optimizer.epsilon);
      e.config.offline_samples = s.count("offline_samples", 0);
      e.online_forecasts = s.count("online_forecasts", 0);
      s.reject_unknown();
      c.controllers.push_back(e);
    }
  } else {
    c.controllers = default_controllers();
  }
  if (top.has("forecast")) {
    Section s = top.child("forecast");
    c.forecast.source = s.text("source", c.forecast.source);
    c.forecast.offline_samples = s.count("offline_samples", c.forecast.offline_samples);
    c.forecast.online_forecasts = s.count("online_forecasts", c.forecast.online_forecasts);
    c.forecast.strata = parse_enum(s, "strata", to_string(c.forecast.strata), parse_strata_key);
    s.reject_unknown();
  }
  if (top.has("tuning")) {
    Section s = top.child("tuning");
    auto& g = c.tuning.grid;
    c.tuning.enabled = s.flag("enabled", c.tuning.enabled);
    g.gains = s.numbers("gains", g.gains);
    g.betas = s.numbers("betas", g.betas);
    g.epsilons = s.numbers("epsilons", g.epsilons);
    g.optimizer = parse_enum(s, "optimizer", to_string(g.optimizer), parse_optimizer_kind);
    if (s.has("forecast_sizes")) {
      const json& sizes = s.at("forecast_sizes");
      if (!sizes.is_array()) fail(s.field("forecast_sizes"), "expected an array of [offline, online] pairs");
      g.forecast_sizes.clear();
      for (const auto& p : sizes) {
        if (!p.is_array() || p.size() != 2 || !p[0].is_number_unsigned() || !p[1].is_number_unsigned()) {
          fail(s.field("forecast_sizes"), "expected an array of [offline, online] pairs");
        }
        g.forecast_sizes.emplace_back(p[0].get<std::size_t>(), p[1].get<std::size_t>());
      }
    }
    c.tuning.mode = parse_enum(s, "progress_mode", to_string(c.tuning.mode), parse_progress_mode);
    c.tuning.realized_episodes = static_cast<int>(s.integer("realized_episodes", c.tuning.realized_episodes));
    s.reject_unknown();
  }
  top.reject_unknown();
  apply_overrides(c, overrides);
  validate(c);
  c.canonical = canonical_json(c).dump();
  return c;
}

PositionWeights make_weights(const InterventionConfig& iv, std::size_t n) {
  auto curve = [&](const std::string& name) { return name == "dcg" ? dcg_weights(n, iv.cutoff_k) : rr_weights(n, iv.cutoff_k); };
  return make_position_weights(curve(iv.utility_metric), curve(iv.exposure_metric), iv.cutoff_k);
}

Vector per_constraint(const std::vector<double>& values, std::size_t m, const std::string& field) {
  if (values.size() == 1) return Vector::Constant(static_cast<Eigen::Index>(m), values.front());
  if (values.size() != m) {
    fail(field, "expected 1 or " + std::to_string(m) + " values, got " + std::to_string(values.size()));
  }
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(m));
}

InterventionSpec spec_for(const ExperimentConfig& c, const ContextStream& target, const ContextStream& test,
                          const PositionWeights& weights) {
  InterventionSpec spec;
  const std::size_t m = target.num_constraints();
  spec.horizon = target.horizon();
  spec.weights = weights;
  spec.phi = per_constraint(c.intervention.phi, m, "intervention.phi");
  if (c.intervention.tau) {
    // Targets are stated for the test horizon and scale with horizon length.
    const double scale = static_cast<double>(target.horizon()) / static_cast<double>(test.horizon());
    spec.tau = per_constraint(*c.intervention.tau, m, "intervention.tau") * scale;
  } else {
    spec.tau = target_from_baseline(target, weights, per_constraint(*c.intervention.baseline_factors, m,
                                                                    "intervention.baseline_factors"));
  }
  spec.validate();
  return spec;
}

std::string hex64(std::uint64_t x) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[x & 0xF];
    x >>= 4;
  }
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("output_dir: cannot create '" + dir.string() + "'");
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("output_dir: cannot write '" + path.string() + "'");
  return out;
}

fs::path write_manifest(const ExperimentConfig& c, const std::string& command, const std::vector<fs::path>& outputs,
                        json extra = json::object()) {
  json j;
  j["command"] = command;
  j["version"] = kVersion;
  j["seed"] = c.seed;
  j["config_hash"] = config_hash(c);
  j["progress_mode"] = to_string(c.progress_mode);
  json files = json::array();
  for (const auto& p : outputs) files.push_back(p.filename().string());
  j["outputs"] = files;
  for (auto& [k, v] : extra.items()) j[k] = v;
  j["config"] = json::parse(c.canonical);
  const fs::path path = c.output_dir / (command + "_manifest.json");
  auto out = open_out(path);
  out << j.dump(2) << '\n';
  return path;
}

std::string state_header(const std::string& prefix, std::size_t m) {
  std::string out;
  for (std::size_t i = 1; i <= m; ++i) out += "," + prefix + std::to_string(i);
  return out;
}

std::string vector_cells(const Vector& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) out += "," + format_double(v[i]);
  return out;
}

std::string results_row(const std::string& name, double phi, const ControllerConfig& cfg, const EpisodeResult& r) {
  std::ostringstream row;
  row << name << ',' << format_double(phi) << ',' << format_double(r.objective) << ','
      << format_double(r.total_utility()) << ',' << format_double(r.violation) << ',' << format_double(cfg.gain)
      << ',' << to_string(cfg.optimizer.kind) << ',' << format_double(cfg.optimizer.beta) << ','
      << format_double(cfg.optimizer.epsilon) << ',' << (cfg.forecasts ? cfg.forecasts->num_forecasts() : 0)
      << vector_cells(r.terminal.s);
  return row.str();
}

std::string results_header(std::size_t m) {
  return "controller,phi,objective,utility,violation,gain,optimizer,beta,epsilon,online_forecasts" +
         state_header("terminal_state_", m);
}

// Forecast tables are cached per (tau, phi, stream window, sizes) since sweeps and
// tuning request the same table repeatedly.
class ForecastCache {
 public:
  ForecastCache(const ExperimentConfig& c, const Workspace& ws) : config_(c), ws_(ws) {}

  ProgressToGoTable get(const ContextStream& target, const InterventionSpec& spec, std::size_t b_off, std::size_t b_on) {
    Key key{std::vector<double>(spec.tau.data(), spec.tau.data() + spec.tau.size()),
            std::vector<double>(spec.phi.data(), spec.phi.data() + spec.phi.size()), target.contexts.front().t,
            target.horizon(), b_off, b_on};
    {
      std::lock_guard<std::mutex> lock(mutex_);
      if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    ProgressToGoTable table = make_forecasts(config_, ws_, target, spec, b_off, b_on);
    std::lock_guard<std::mutex> lock(mutex_);
    return cache_.emplace(key, std::move(table)).first->second;
  }

 private:
  using Key = std::tuple<std::vector<double>, std::vector<double>, int, int, std::size_t, std::size_t>;
  const ExperimentConfig& config_;
  const Workspace& ws_;
  std::mutex mutex_;
  std::map<Key, ProgressToGoTable> cache_;
};

std::pair<std::size_t, std::size_t> forecast_sizes(const ExperimentConfig& c, const ControllerEntry& e) {
  const std::size_t off = e.config.offline_samples ? e.config.offline_samples : c.forecast.offline_samples;
  std::size_t on = e.online_forecasts ? e.online_forecasts : std::min(c.forecast.online_forecasts, off);
  if (on > off) fail("controllers.online_forecasts", "must not exceed offline_samples");
  return {off, on};
}

const ContextStream& tuning_stream(const Workspace& ws) {
  if (ws.splits.dev.contexts.empty()) throw ConfigError("split: tuning needs a non-empty dev split");
  return ws.splits.dev;
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text, const CommandOverrides& overrides,
                              const fs::path& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_root(root, overrides, base_dir);
}

ExperimentConfig load_config(const fs::path& path, const CommandOverrides& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config file not found: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), overrides, path.parent_path());
}

ExperimentConfig default_config(const CommandOverrides& overrides) { return parse_root(json::object(), overrides, {}); }

std::string config_hash(const ExperimentConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : config.canonical) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return hex64(h);
}

Workspace prepare_workspace(const ExperimentConfig& c) {
  Workspace ws;
  try {
    ws.stream = c.dataset.source == "synthetic" ? generate_synthetic(c.dataset.synthetic, c.seed)
                                                : load_csv(c.dataset.contexts, c.dataset.groups);
  } catch (const DataError&) {
    throw;
  } catch (const InvalidInput& e) {
    throw ConfigError(std::string("dataset: ") + e.what());
  }
  if (c.split.mode == "identical") {
    ws.splits = {ws.stream, ws.stream, ws.stream};
  } else {
    ws.splits = split_stream(ws.stream, c.split.ratios);
  }
  if (ws.splits.test.contexts.empty()) throw ConfigError("split: test split is empty");
  const PositionWeights weights = make_weights(c.intervention, ws.stream.num_items());
  ws.test_spec = spec_for(c, ws.splits.test, ws.splits.test, weights);
  ws.dev_spec = ws.splits.dev.contexts.empty() ? ws.test_spec : spec_for(c, ws.splits.dev, ws.splits.test, weights);
  return ws;
}

ProgressToGoTable make_forecasts(const ExperimentConfig& c, const Workspace& ws, const ContextStream& target,
                                 const InterventionSpec& spec, std::size_t offline_samples,
                                 std::size_t online_forecasts) {
  if (c.forecast.source == "exact") {
    const OraclePlan plan = oracle_plan(target.contexts, spec);
    return progress_to_go_from_plan(plan.policies, target, spec, online_forecasts);
  }
  if (ws.splits.train.contexts.empty()) throw ConfigError("split: forecasting needs a non-empty train split");
  const std::vector<int> timeline = strata_labels(c.forecast.strata, target);
  const ForecastPlan plan = stratified_bootstrap(ws.splits.train, timeline, offline_samples, c.forecast.strata, c.seed);
  const OfflinePolicy policy = fit_offline_policy(plan, ws.splits.train, spec);
  return progress_to_go(policy, plan, ws.splits.train, spec, online_forecasts);
}

std::vector<fs::path> cmd_synth(const ExperimentConfig& c) {
  if (c.dataset.source != "synthetic") fail("dataset.source", "synth requires a synthetic dataset");
  ensure_dir(c.output_dir);
  const ContextStream stream = generate_synthetic(c.dataset.synthetic, c.seed);
  std::vector<fs::path> out = {c.output_dir / "contexts.csv", c.output_dir / "groups.csv"};
  write_csv(stream, out[0], out[1]);
  out.push_back(write_manifest(c, "synth", out,
                               {{"horizon", stream.horizon()},
                                {"n_items", stream.num_items()},
                                {"num_constraints", stream.num_constraints()}}));
  return out;
}

std::vector<fs::path> cmd_run(const ExperimentConfig& c) {
  const Workspace ws = prepare_workspace(c);
  ensure_dir(c.output_dir);
  ForecastCache forecasts(c, ws);
  const std::size_t m = ws.test_spec.num_constraints();
  const fs::path results_path = c.output_dir / "results.csv";
  const fs::path trace_path = c.output_dir / "trace.csv";
  auto results = open_out(results_path);
  auto trace = open_out(trace_path);
  results << results_header(m) << '\n';
  trace << "controller,t,utility" << state_header("progress_", m) << state_header("state_", m) << '\n';
  for (const auto& entry : c.controllers) {
    ControllerConfig cfg = entry.config;
    if (cfg.kind == ControllerKind::kPredictive) {
      const auto [off, on] = forecast_sizes(c, entry);
      cfg.forecasts = forecasts.get(ws.splits.test, ws.test_spec, off, on);
      cfg.offline_samples = off;
    }
    Controller controller(cfg, ws.test_spec);
    const EpisodeResult r = run_episode(controller, ws.splits.test, ws.test_spec, c.progress_mode, c.seed);
    results << results_row(r.controller, ws.test_spec.phi.maxCoeff(), cfg, r) << '\n';
    Vector s = Vector::Zero(static_cast<Eigen::Index>(m));
    for (std::size_t t = 0; t < r.utilities.size(); ++t) {
      s += r.progress[t];
      trace << r.controller << ',' << ws.splits.test.contexts[t].t << ',' << format_double(r.utilities[t])
            << vector_cells(r.progress[t]) << vector_cells(s) << '\n';
    }
  }
  if (!results || !trace) throw ConfigError("output_dir: write failed");
  results.close();
  trace.close();
  std::vector<fs::path> out = {results_path, trace_path};
  json tau = std::vector<double>(ws.test_spec.tau.data(), ws.test_spec.tau.data() + ws.test_spec.tau.size());
  out.push_back(write_manifest(c, "run", out, {{"tau", tau}}));
  return out;
}

std::vector<fs::path> cmd_sweep(const ExperimentConfig& c) {
  const Workspace ws = prepare_workspace(c);
  ensure_dir(c.output_dir);
  ForecastCache forecasts(c, ws);
  std::vector<ControllerConfig> controllers;
  std::size_t online = 0;
  for (const auto& e : c.controllers) {
    ControllerConfig cfg = e.config;
    if (cfg.kind == ControllerKind::kPredictive) std::tie(cfg.offline_samples, online) = forecast_sizes(c, e);
    controllers.push_back(cfg);
  }
  SweepOptions options;
  options.online_forecasts = online;
  options.mode = c.progress_mode;
  options.seed = c.seed;
  options.workers = c.workers;
  options.forecast_for = [&](const ContextStream& target, const InterventionSpec& spec, std::size_t off,
                             std::size_t on) {
    return forecasts.get(target, spec, off, on);
  };
  if (c.tuning.enabled) {
    options.tuning = SweepTuning{tuning_stream(ws), ws.dev_spec, c.tuning.grid,
                                 TuningOptions{c.tuning.mode, c.tuning.realized_episodes, c.seed}};
  }
  const auto cells = sweep_phi(ws.splits.test, ws.test_spec, controllers, c.intervention.phi_grid, options);
  const fs::path path = c.output_dir / "sweep.csv";
  auto out = open_out(path);
  out << results_header(ws.test_spec.num_constraints()) << '\n';
  for (const auto& cell : cells) out << results_row(cell.controller, cell.phi, cell.config, cell.result) << '\n';
  if (!out) throw ConfigError("output_dir: write failed");
  out.close();
  std::vector<fs::path> files = {path};
  files.push_back(write_manifest(c, "sweep", files, {{"tuned", c.tuning.enabled}}));
  return files;
}

std::vector<fs::path> cmd_forecast(const ExperimentConfig& c) {
  const Workspace ws = prepare_workspace(c);
  ensure_dir(c.output_dir);
  const ProgressToGoTable table =
      make_forecasts(c, ws, ws.splits.test, ws.test_spec, c.forecast.offline_samples, c.forecast.online_forecasts);
  const fs::path path = c.output_dir / "progress_to_go.csv";
  write_progress_to_go(table, path);
  std::vector<fs::path> files = {path};
  files.push_back(write_manifest(c, "forecast", files,
                                 {{"offline_samples", c.forecast.offline_samples},
                                  {"online_forecasts", c.forecast.online_forecasts},
                                  {"strata", to_string(c.forecast.strata)},
                                  {"source", c.forecast.source}}));
  return files;
}

std::vector<fs::path> cmd_tune(const ExperimentConfig& c) {
  const Workspace ws = prepare_workspace(c);
  const ContextStream& dev = tuning_stream(ws);
  ensure_dir(c.output_dir);
  ForecastCache forecasts(c, ws);
  const fs::path log_path = c.output_dir / "tuning_log.csv";
  const fs::path best_path = c.output_dir / "tuned.json";
  auto log = open_out(log_path);
  log << "controller,phi,index,gain,optimizer,beta,epsilon,offline_samples,online_forecasts,objective\n";
  json best = json::array();
  for (const auto& entry : c.controllers) {
    for (double phi : c.intervention.phi_grid) {
      InterventionSpec spec = ws.dev_spec;
      spec.phi = Vector::Constant(spec.tau.size(), phi);
      const auto configs = expand_grid(entry.config.kind, c.tuning.grid, [&](std::size_t off, std::size_t on) {
        return forecasts.get(dev, spec, off, on);
      });
      const TuningResult result =
          tune_gain(dev, configs, spec, TuningOptions{c.tuning.mode, c.tuning.realized_episodes, c.seed});
      for (const auto& rec : result.log) {
        const auto& cfg = rec.config;
        log << to_string(entry.config.kind) << ',' << format_double(phi) << ',' << rec.index << ','
            << format_double(cfg.gain) << ',' << to_string(cfg.optimizer.kind) << ','
            << format_double(cfg.optimizer.beta) << ',' << format_double(cfg.optimizer.epsilon) << ','
            << cfg.offline_samples << ',' << (cfg.forecasts ? cfg.forecasts->num_forecasts() : 0) << ','
            << format_double(rec.objective) << '\n';
      }
      const auto& b = result.best;
      best.push_back({{"controller", to_string(entry.config.kind)},
                      {"phi", phi},
                      {"index", result.best_index},
                      {"gain", b.gain},
                      {"optimizer", to_string(b.optimizer.kind)},
                      {"beta", b.optimizer.beta},
                      {"epsilon", b.optimizer.epsilon},
                      {"offline_samples", b.offline_samples},
                      {"online_forecasts", b.forecasts ? b.forecasts->num_forecasts() : 0},
                      {"objective", result.best_objective}});
    }
  }
  if (!log) throw ConfigError("output_dir: write failed");
  log.close();
  {
    auto out = open_out(best_path);
    out << best.dump(2) << '\n';
  }
  std::vector<fs::path> files = {best_path, log_path};
  files.push_back(write_manifest(c, "tune", files));
  return files;
}

}  // namespace rankctl
