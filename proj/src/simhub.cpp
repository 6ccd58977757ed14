#include "rankctl/simhub.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

namespace rankctl {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidInput(what);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

long parse_int(const std::string& s, const std::filesystem::path& path, std::size_t line, const char* name) {
  long v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) throw DataError(where(path, line) + name + " '" + s + "' is not an integer");
  return v;
}

double parse_real(const std::string& s, const std::filesystem::path& path, std::size_t line, const char* name) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    // from_chars rejects some spellings of nan/inf; treat those explicitly.
    std::string lower(s);
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower.find("nan") != std::string::npos) throw DataError(where(path, line) + name + " is NaN");
    throw DataError(where(path, line) + name + " '" + s + "' is not a number");
  }
  if (std::isnan(v)) throw DataError(where(path, line) + name + " is NaN");
  if (!std::isfinite(v)) throw DataError(where(path, line) + name + " is not finite");
  return v;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open file");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

}  // namespace

void ContextStream::validate() const {
  require(!contexts.empty(), "context stream is empty");
  const std::size_t n = num_items(), m = num_constraints();
  for (const auto& ctx : contexts) {
    require(ctx.num_items() == n && ctx.num_constraints() == m,
            "context stream has non-uniform dimensions at t=" + std::to_string(ctx.t));
  }
  require(strata.empty() || strata.size() == contexts.size(), "strata labels misaligned with contexts");
}

ContextStream ContextStream::slice(std::size_t begin, std::size_t end) const {
  require(begin <= end && end <= contexts.size(), "slice out of range");
  ContextStream out;
  out.contexts.assign(contexts.begin() + static_cast<std::ptrdiff_t>(begin), contexts.begin() + static_cast<std::ptrdiff_t>(end));
  if (!strata.empty()) out.strata.assign(strata.begin() + static_cast<std::ptrdiff_t>(begin), strata.begin() + static_cast<std::ptrdiff_t>(end));
  return out;
}

double EpisodeResult::total_utility() const {
  double total = 0.0;
  for (double u : utilities) total += u;
  return total;
}

std::uint64_t step_seed(std::uint64_t seed, int t) {
  return splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(t));
}

EpisodeResult run_episode(Controller& controller, const ContextStream& stream, const InterventionSpec& spec,
                          ProgressMode mode, std::uint64_t seed) {
  stream.validate();
  spec.validate();
  require(stream.horizon() == spec.horizon, "stream has " + std::to_string(stream.horizon()) +
                                                " steps but spec horizon is " + std::to_string(spec.horizon));
  require(stream.num_items() == spec.weights.size() && stream.num_constraints() == spec.num_constraints(),
          "stream dimensions do not match the intervention spec");
  if (controller.needs_plan()) controller.set_plan(oracle_plan(stream.contexts, spec).policies);

  EpisodeResult result;
  result.controller = to_string(controller.config().kind);
  result.terminal = ProgressState::zero(spec.num_constraints());
  result.utilities.reserve(stream.contexts.size());
  for (int t = 1; t <= spec.horizon; ++t) {
    const Context& ctx = stream.contexts[static_cast<std::size_t>(t - 1)];
    RankingPolicy policy;
    try {
      policy = controller.select(ctx, result.terminal, t);
    } catch (const SolverError& e) {
      throw SolverError("step " + std::to_string(t) + ": " + e.what());
    }
    double u = 0.0;
    Vector c;
    if (mode == ProgressMode::kExpected) {
      u = utility(ctx, policy, spec.weights);
      c = progress(ctx, policy, spec.weights);
    } else {
      Permutation perm = policy.is_permutation() ? policy.to_permutation()
                                                 : sample(decompose(policy), step_seed(seed, t));
      u = utility(ctx, perm, spec.weights);
      c = progress(ctx, perm, spec.weights);
      result.sampled.push_back(std::move(perm));
    }
    result.utilities.push_back(u);
    result.terminal.advance(c);
    result.progress.push_back(std::move(c));
    result.multipliers.push_back(controller.multipliers().lambda);
  }
  result.violation = violation_cost(spec, result.terminal);
  result.objective = result.total_utility() - result.violation;
  return result;
}

void SyntheticSpec::validate() const {
  require(n_items >= 1 && horizon >= 1, "synthetic: n_items and horizon must be >= 1");
  std::vector<bool> seen(n_items, false);
  for (const auto* group : {&group_one, &group_two}) {
    require(!group->empty(), "synthetic: groups must be non-empty");
    for (std::size_t j : *group) {
      require(j < n_items, "synthetic: group item out of range");
      require(!seen[j], "synthetic: groups must be disjoint");
      seen[j] = true;
    }
  }
  for (double r : {constant_relevance, in_season, off_season}) {
    require(r >= 0.0 && r <= 1.0, "synthetic: relevances must lie in [0, 1]");
  }
  require(noise >= 0.0, "synthetic: noise must be >= 0");
}

ContextStream generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  const auto n = static_cast<Eigen::Index>(spec.n_items);
  Matrix groups = Matrix::Zero(2, n);
  for (std::size_t j : spec.group_one) groups(0, static_cast<Eigen::Index>(j)) = 1.0;
  for (std::size_t j : spec.group_two) groups(1, static_cast<Eigen::Index>(j)) = 1.0;

  ContextStream stream;
  const int half = spec.horizon / 2;
  for (int t = 1; t <= spec.horizon; ++t) {
    const bool first_half = t <= half;
    Vector r = Vector::Constant(n, spec.constant_relevance);
    auto season = [&](const std::vector<std::size_t>& group, bool active) {
      for (std::size_t j : group) {
        double v = active ? spec.in_season : spec.off_season;
        if (spec.noise > 0.0) v += spec.noise * jitter(rng);
        r[static_cast<Eigen::Index>(j)] = v;
      }
    };
    season(spec.group_one, first_half);
    season(spec.group_two, !first_half);
    stream.contexts.push_back(make_context(t, std::move(r), groups));
    stream.strata.push_back(first_half ? 0 : 1);
  }
  return stream;
}

std::string format_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc()) throw InvalidInput("cannot format number");
  return std::string(buf, ptr);
}

ContextStream load_csv(const std::filesystem::path& contexts_path, const std::filesystem::path& groups_path) {
  const auto lines = read_lines(contexts_path);
  if (lines.empty()) throw DataError(where(contexts_path, 1) + "missing header");
  const auto header = split_fields(lines[0]);
  const bool has_stratum = header == std::vector<std::string>{"t", "item_id", "relevance", "stratum"};
  if (!has_stratum && header != std::vector<std::string>{"t", "item_id", "relevance"}) {
    throw DataError(where(contexts_path, 1) + "expected header t,item_id,relevance[,stratum]");
  }
  const std::size_t width = has_stratum ? 4 : 3;

  struct Row {
    long t, item;
    double relevance;
    long stratum;
  };
  std::vector<Row> rows;
  long max_t = 0, max_item = 0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (lines[i].empty()) continue;
    const auto f = split_fields(lines[i]);
    if (f.size() != width) {
      throw DataError(where(contexts_path, line_no) + "expected " + std::to_string(width) + " fields, got " +
                      std::to_string(f.size()));
    }
    Row r{parse_int(f[0], contexts_path, line_no, "t"), parse_int(f[1], contexts_path, line_no, "item_id"),
          parse_real(f[2], contexts_path, line_no, "relevance"),
          has_stratum ? parse_int(f[3], contexts_path, line_no, "stratum") : 0};
    if (r.t < 1) throw DataError(where(contexts_path, line_no) + "t must be >= 1");
    if (r.item < 1) throw DataError(where(contexts_path, line_no) + "item_id must be >= 1");
    max_t = std::max(max_t, r.t);
    max_item = std::max(max_item, r.item);
    rows.push_back(r);
  }
  if (rows.empty()) throw DataError(contexts_path.string() + ": no context rows");

  const auto n = static_cast<Eigen::Index>(max_item);
  std::vector<Vector> relevance(static_cast<std::size_t>(max_t), Vector::Zero(n));
  std::vector<std::vector<bool>> filled(static_cast<std::size_t>(max_t), std::vector<bool>(static_cast<std::size_t>(n), false));
  std::vector<long> stratum(static_cast<std::size_t>(max_t), -1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Row& r = rows[i];
    const auto ti = static_cast<std::size_t>(r.t - 1), ji = static_cast<std::size_t>(r.item - 1);
    if (filled[ti][ji]) {
      throw DataError(contexts_path.string() + ": duplicate row for t=" + std::to_string(r.t) +
                      ", item_id=" + std::to_string(r.item));
    }
    filled[ti][ji] = true;
    relevance[ti][static_cast<Eigen::Index>(ji)] = r.relevance;
    if (stratum[ti] >= 0 && stratum[ti] != r.stratum) {
      throw DataError(contexts_path.string() + ": inconsistent stratum labels at t=" + std::to_string(r.t));
    }
    stratum[ti] = r.stratum;
  }
  for (std::size_t ti = 0; ti < stratum.size(); ++ti) {
    if (stratum[ti] < 0) throw DataError(contexts_path.string() + ": no rows for t=" + std::to_string(ti + 1));
  }

  const auto glines = read_lines(groups_path);
  if (glines.empty() || split_fields(glines[0]) != std::vector<std::string>{"constraint_id", "item_id", "weight"}) {
    throw DataError(where(groups_path, 1) + "expected header constraint_id,item_id,weight");
  }
  std::vector<std::tuple<long, long, double>> entries;
  long m = 0;
  for (std::size_t i = 1; i < glines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (glines[i].empty()) continue;
    const auto f = split_fields(glines[i]);
    if (f.size() != 3) throw DataError(where(groups_path, line_no) + "expected 3 fields, got " + std::to_string(f.size()));
    const long c = parse_int(f[0], groups_path, line_no, "constraint_id");
    const long j = parse_int(f[1], groups_path, line_no, "item_id");
    const double w = parse_real(f[2], groups_path, line_no, "weight");
    if (c < 1) throw DataError(where(groups_path, line_no) + "constraint_id must be >= 1");
    if (j < 1 || j > max_item) throw DataError(where(groups_path, line_no) + "unknown item_id " + std::to_string(j));
    if (w < 0.0) throw DataError(where(groups_path, line_no) + "weight must be >= 0");
    m = std::max(m, c);
    entries.emplace_back(c, j, w);
  }
  Matrix groups = Matrix::Zero(m, n);
  for (const auto& [c, j, w] : entries) groups(c - 1, j - 1) = w;

  ContextStream stream;
  for (long t = 1; t <= max_t; ++t) {
    stream.contexts.push_back(make_context(static_cast<int>(t), relevance[static_cast<std::size_t>(t - 1)], groups));
  }
  if (has_stratum) {
    for (long s : stratum) stream.strata.push_back(static_cast<int>(s));
  }
  return stream;
}

void write_csv(const ContextStream& stream, const std::filesystem::path& contexts_path,
               const std::filesystem::path& groups_path) {
  stream.validate();
  {
    std::ofstream out(contexts_path, std::ios::binary);
    if (!out) throw DataError(contexts_path.string() + ": cannot write file");
    const bool has_stratum = !stream.strata.empty();
    out << (has_stratum ? "t,item_id,relevance,stratum\n" : "t,item_id,relevance\n");
    for (std::size_t i = 0; i < stream.contexts.size(); ++i) {
      const Context& ctx = stream.contexts[i];
      for (Eigen::Index j = 0; j < ctx.relevance.size(); ++j) {
        out << (i + 1) << ',' << (j + 1) << ',' << format_double(ctx.relevance[j]);
        if (has_stratum) out << ',' << stream.strata[i];
        out << '\n';
      }
    }
    if (!out) throw DataError(contexts_path.string() + ": write failed");
  }
  std::ofstream out(groups_path, std::ios::binary);
  if (!out) throw DataError(groups_path.string() + ": cannot write file");
  out << "constraint_id,item_id,weight\n";
  const Matrix& w = stream.contexts.front().groups;
  for (Eigen::Index c = 0; c < w.rows(); ++c) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      if (w(c, j) != 0.0) out << (c + 1) << ',' << (j + 1) << ',' << format_double(w(c, j)) << '\n';
    }
  }
  if (!out) throw DataError(groups_path.string() + ": write failed");
}

Vector target_from_baseline(const ContextStream& stream, const PositionWeights& weights, const Vector& factors) {
  stream.validate();
  require(factors.size() == static_cast<Eigen::Index>(stream.num_constraints()), "one factor per constraint required");
  require(factors.size() == 0 || factors.minCoeff() >= 0.0, "factors must be >= 0");
  Vector exposure = Vector::Zero(factors.size());
  for (const auto& ctx : stream.contexts) exposure += progress(ctx, unconstrained_select(ctx), weights);
  return factors.cwiseProduct(exposure);
}

StreamSplits split_stream(const ContextStream& stream, const SplitRatios& ratios) {
  stream.validate();
  require(ratios.train >= 0 && ratios.dev >= 0 && ratios.test >= 0, "split ratios must be >= 0");
  const double total = ratios.train + ratios.dev + ratios.test;
  require(total > 0.0, "split ratios must not all be zero");
  const auto size = stream.contexts.size();
  const auto train_end = static_cast<std::size_t>(std::llround(static_cast<double>(size) * ratios.train / total));
  const auto dev_end = static_cast<std::size_t>(std::llround(static_cast<double>(size) * (ratios.train + ratios.dev) / total));
  return {stream.slice(0, train_end), stream.slice(train_end, std::max(train_end, dev_end)),
          stream.slice(std::max(train_end, dev_end), size)};
}

}  // namespace rankctl
