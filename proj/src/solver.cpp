#include "rankctl/solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <string>

namespace rankctl {

Matrix linear_score(const Vector& relevance, const Vector& item_boost, const PositionWeights& w) {
  if (relevance.size() != w.u.size() || item_boost.size() != w.e.size()) {
    throw InvalidInput("linear_score: dimension mismatch");
  }
  return w.u * relevance.transpose() + w.e * item_boost.transpose();
}

namespace {

void check_hinge_program(const HingeProgram& prog) {
  const Eigen::Index n = prog.score.rows();
  const Eigen::Index m = prog.targets.size();
  if (prog.score.cols() != n || n == 0) throw InvalidInput("hinge program: score must be square");
  if (prog.costs.size() != m || prog.groups.rows() != m || prog.groups.cols() != n ||
      prog.exposure.size() != n) {
    throw InvalidInput("hinge program: dimension mismatch");
  }
  if (m > 0 && prog.costs.minCoeff() < 0.0) throw InvalidInput("hinge program: costs must be >= 0");
  if (!prog.score.allFinite() || !prog.targets.allFinite() || !prog.groups.allFinite()) {
    throw InvalidInput("hinge program: non-finite input");
  }
}

Vector exposure_of(const Permutation& perm, const Vector& e) {
  Vector x(e.size());
  for (std::size_t k = 0; k < perm.size(); ++k) {
    x[static_cast<Eigen::Index>(perm.item_at(k))] = e[static_cast<Eigen::Index>(k)];
  }
  return x;
}

}  // namespace

double hinge_objective(const HingeProgram& prog, const Matrix& sigma) {
  const double base = prog.score.cwiseProduct(sigma).sum();
  const Vector prog_vec = prog.groups * (sigma.transpose() * prog.exposure);
  return base - prog.costs.dot(hinge(prog.targets - prog_vec));
}

HingeSolution solve_hinge_lp(const HingeProgram& prog) {
  check_hinge_program(prog);
  const Eigen::Index n = prog.score.rows();
  const Eigen::Index m = prog.targets.size();

  // The unconstrained maximizer is optimal whenever it pays no hinge.
  const Permutation best = solve_assignment(prog.score);
  {
    const Vector slack = hinge(prog.targets - prog.groups * exposure_of(best, prog.exposure));
    if (m == 0 || prog.costs.dot(slack) == 0.0) {
      HingeSolution sol{best.to_policy(), 0.0, slack};
      sol.objective = hinge_objective(prog, sol.policy.matrix());
      return sol;
    }
  }

  // Variables: x(k, j) at k * n + j, then z_i. Rows: positions, items, hinges.
  const Eigen::Index nv = n * n + m;
  LinearProgram lp;
  lp.a = Matrix::Zero(2 * n + m, nv);
  lp.b = Vector::Zero(2 * n + m);
  lp.c = Vector::Zero(nv);
  lp.sense.assign(static_cast<std::size_t>(2 * n + m), RowSense::kEqual);
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const Eigen::Index v = k * n + j;
      lp.c[v] = prog.score(k, j);
      lp.a(k, v) = 1.0;
      lp.a(n + j, v) = 1.0;
      for (Eigen::Index i = 0; i < m; ++i) lp.a(2 * n + i, v) = prog.groups(i, j) * prog.exposure[k];
    }
    lp.b[k] = 1.0;
    lp.b[n + k] = 1.0;
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    lp.c[n * n + i] = -prog.costs[i];
    lp.a(2 * n + i, n * n + i) = 1.0;
    lp.b[2 * n + i] = prog.targets[i];
    lp.sense[static_cast<std::size_t>(2 * n + i)] = RowSense::kGreaterEqual;
  }

  const LpSolution lps = solve_lp(lp);
  Matrix sigma(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    for (Eigen::Index j = 0; j < n; ++j) sigma(k, j) = lps.x[k * n + j];
  }
  HingeSolution sol{RankingPolicy::from_matrix(std::move(sigma)), 0.0, Vector()};
  sol.slack = hinge(prog.targets - prog.groups * (sol.policy.matrix().transpose() * prog.exposure));
  sol.objective = hinge_objective(prog, sol.policy.matrix());
  return sol;
}

namespace {

// Aggregated data for one group of interchangeable slots.
struct SlotBlock {
  Vector relevance;                                 // sum (w / B) r_t
  std::vector<std::pair<std::size_t, Matrix>> by_sample;  // (b, sum w_t W_t)
  std::vector<std::size_t> members;                 // original slot ids
  std::vector<Permutation> pool;
};

using Multipliers = Matrix;  // B x m

class HorizonSolver {
 public:
  HorizonSolver(const HorizonProblem& problem, const HorizonOptions& options)
      : prob_(problem), opt_(options) {
    validate();
    build_blocks();
  }

  HorizonSolution solve() {
    const Eigen::Index bm = static_cast<Eigen::Index>(prob_.num_samples) * m_;
    Multipliers upper(static_cast<Eigen::Index>(prob_.num_samples), m_);
    for (Eigen::Index b = 0; b < upper.rows(); ++b) upper.row(b) = prob_.phi.transpose();
    upper_ = upper;

    const bool constrained = bm > 0 && prob_.phi.maxCoeff() > 0.0;
    Multipliers start = Multipliers::Zero(upper.rows(), upper.cols());
    collect(start);
    if (constrained) {
      collect(upper);
      Multipliers best = bm <= 2 ? golden_search() : subgradient_search();
      collect(best);
      const double scale = std::max(1.0, prob_.phi.maxCoeff());
      for (double delta : {10.0 * opt_.dual_tol * scale, 1e-3 * scale}) {
        for (Eigen::Index idx = 0; idx < best.size(); ++idx) {
          for (double sgn : {-1.0, 1.0}) {
            Multipliers probe = best;
            probe.data()[idx] = std::clamp(probe.data()[idx] + sgn * delta, 0.0, upper_.data()[idx]);
            collect(probe);
          }
        }
      }
    }

    HorizonSolution out;
    Multipliers lambda = start;
    std::vector<Vector> mix;
    for (int round = 0;; ++round) {
      mix = solve_master(lambda);
      out.refinements = round;
      if (!constrained || round >= opt_.max_refinements) break;
      if (!price(lambda)) break;
    }

    out.policies.resize(prob_.num_slots);
    for (std::size_t g = 0; g < blocks_.size(); ++g) {
      const auto nn = static_cast<Eigen::Index>(n_);
      Matrix sigma = Matrix::Zero(nn, nn);
      for (std::size_t v = 0; v < blocks_[g].pool.size(); ++v) {
        const double wv = mix[g][static_cast<Eigen::Index>(v)];
        if (wv == 0.0) continue;
        const auto& perm = blocks_[g].pool[v];
        for (std::size_t k = 0; k < n_; ++k) {
          sigma(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(perm.item_at(k))) += wv;
        }
      }
      // Renormalize away LP round-off before validation.
      for (int pass = 0; pass < 2; ++pass) {
        for (Eigen::Index k = 0; k < nn; ++k) sigma.row(k) /= sigma.row(k).sum();
        for (Eigen::Index j = 0; j < nn; ++j) sigma.col(j) /= sigma.col(j).sum();
      }
      RankingPolicy policy = RankingPolicy::from_matrix(std::move(sigma));
      for (std::size_t slot : blocks_[g].members) out.policies[slot] = policy;
    }
    for (std::size_t slot = 0; slot < prob_.num_slots; ++slot) {
      if (out.policies[slot].size() == 0) out.policies[slot] = RankingPolicy::identity(n_);
    }
    out.objective = horizon_objective(prob_, out.policies);
    out.dual_bound = constrained ? dual_value(lambda, nullptr) : out.objective;
    if (out.dual_bound - out.objective > opt_.optimality_gap * std::max(1.0, std::abs(out.objective))) {
      throw SolverError("horizon LP: duality gap " + std::to_string(out.dual_bound - out.objective) +
                        " after " + std::to_string(out.refinements) + " refinements");
    }
    return out;
  }

 private:
  void validate() {
    if (prob_.terms.empty()) throw InvalidInput("horizon LP: at least one context required");
    if (prob_.num_samples == 0) throw InvalidInput("horizon LP: num_samples must be >= 1");
    if (prob_.tau.size() != prob_.phi.size()) throw InvalidInput("horizon LP: tau/phi length mismatch");
    if (prob_.phi.size() > 0 && prob_.phi.minCoeff() < 0.0) throw InvalidInput("horizon LP: phi must be >= 0");
    n_ = prob_.terms.front().context.num_items();
    m_ = prob_.tau.size();
    if (prob_.weights.size() != n_) throw InvalidInput("horizon LP: position weights length mismatch");
    for (const auto& term : prob_.terms) {
      if (term.context.num_items() != n_ || term.context.groups.rows() != m_) {
        throw InvalidInput("horizon LP: context dimensions disagree at t=" + std::to_string(term.context.t));
      }
      if (!(term.weight > 0.0)) throw InvalidInput("horizon LP: term weights must be > 0");
      if (term.slot >= prob_.num_slots) throw InvalidInput("horizon LP: slot index out of range");
      if (term.sample >= prob_.num_samples) throw InvalidInput("horizon LP: sample index out of range");
    }
  }

  void build_blocks() {
    const auto nn = static_cast<Eigen::Index>(n_);
    const double inv_b = 1.0 / static_cast<double>(prob_.num_samples);
    std::vector<Vector> rel(prob_.num_slots, Vector::Zero(nn));
    std::vector<std::map<std::size_t, Matrix>> grp(prob_.num_slots);
    std::vector<bool> used(prob_.num_slots, false);
    for (const auto& term : prob_.terms) {
      used[term.slot] = true;
      rel[term.slot] += (term.weight * inv_b) * term.context.relevance;
      auto [it, inserted] = grp[term.slot].try_emplace(term.sample, Matrix::Zero(m_, nn));
      it->second += term.weight * term.context.groups;
    }
    // Slots with identical aggregated data are interchangeable: any optimum
    // can be replaced by the average of their policies, so they merge exactly.
    std::map<std::vector<double>, std::size_t> index_of_key;
    for (std::size_t slot = 0; slot < prob_.num_slots; ++slot) {
      if (!used[slot]) continue;
      std::vector<double> key(rel[slot].data(), rel[slot].data() + rel[slot].size());
      for (const auto& [b, w] : grp[slot]) {
        key.push_back(-1.0 - static_cast<double>(b));
        key.insert(key.end(), w.data(), w.data() + w.size());
      }
      auto [it, inserted] = index_of_key.try_emplace(std::move(key), blocks_.size());
      if (inserted) {
        SlotBlock block;
        block.relevance = rel[slot];
        block.by_sample.assign(grp[slot].begin(), grp[slot].end());
        blocks_.push_back(std::move(block));
      } else {
        SlotBlock& block = blocks_[it->second];
        block.relevance += rel[slot];
        for (std::size_t i = 0; i < block.by_sample.size(); ++i) block.by_sample[i].second += grp[slot].at(block.by_sample[i].first);
      }
      blocks_[it->second].members.push_back(slot);
    }
  }

  Matrix block_score(const SlotBlock& block, const Multipliers& lambda) const {
    const double inv_b = 1.0 / static_cast<double>(prob_.num_samples);
    Vector boost = Vector::Zero(static_cast<Eigen::Index>(n_));
    if (m_ > 0) {
      for (const auto& [b, w] : block.by_sample) {
        boost += inv_b * (w.transpose() * lambda.row(static_cast<Eigen::Index>(b)).transpose());
      }
    }
    return linear_score(block.relevance, boost, prob_.weights);
  }

  // Per-block column data: objective coefficient and hinge-row coefficients.
  double column_value(const SlotBlock& block, const Permutation& perm) const {
    double v = 0.0;
    for (std::size_t k = 0; k < n_; ++k) {
      v += block.relevance[static_cast<Eigen::Index>(perm.item_at(k))] * prob_.weights.u[static_cast<Eigen::Index>(k)];
    }
    return v;
  }

  // g(lambda) = sum_blocks max_P <score, P> - (1/B) sum_b lambda_b^T tau.
  double dual_value(const Multipliers& lambda, Multipliers* subgrad,
                    std::vector<Permutation>* argmax = nullptr) const {
    const double inv_b = 1.0 / static_cast<double>(prob_.num_samples);
    double value = 0.0;
    if (subgrad) *subgrad = Multipliers::Zero(lambda.rows(), lambda.cols());
    if (argmax) argmax->clear();
    for (const auto& block : blocks_) {
      const Matrix score = block_score(block, lambda);
      Permutation perm = solve_assignment(score);
      value += assignment_value(score, perm);
      if (subgrad && m_ > 0) {
        const Vector expo = exposure_of(perm, prob_.weights.e);
        for (const auto& [b, w] : block.by_sample) {
          subgrad->row(static_cast<Eigen::Index>(b)) += inv_b * (w * expo).transpose();
        }
      }
      if (argmax) argmax->push_back(std::move(perm));
    }
    for (Eigen::Index b = 0; b < lambda.rows(); ++b) {
      value -= inv_b * lambda.row(b).dot(prob_.tau);
      if (subgrad) subgrad->row(b) -= inv_b * prob_.tau.transpose();
    }
    return value;
  }

  void add_to_pool(std::size_t g, const Permutation& perm) {
    auto& pool = blocks_[g].pool;
    if (std::find(pool.begin(), pool.end(), perm) == pool.end()) pool.push_back(perm);
  }

  double collect(const Multipliers& lambda) {
    std::vector<Permutation> argmax;
    const double v = dual_value(lambda, nullptr, &argmax);
    for (std::size_t g = 0; g < blocks_.size(); ++g) add_to_pool(g, argmax[g]);
    return v;
  }

  // Nested golden-section over the (at most two) multiplier coordinates.
  Multipliers golden_search() const {
    Multipliers lambda = Multipliers::Zero(upper_.rows(), upper_.cols());
    const Eigen::Index dims = lambda.size();
    const double tol = opt_.dual_tol * std::max(1.0, prob_.phi.maxCoeff());
    std::function<double(Eigen::Index)> minimize = [&](Eigen::Index d) -> double {
      if (d == dims) return dual_value(lambda, nullptr);
      const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
      double lo = 0.0, hi = upper_.data()[d];
      auto eval = [&](double x) {
        lambda.data()[d] = x;
        return minimize(d + 1);
      };
      double x1 = hi - invphi * (hi - lo), x2 = lo + invphi * (hi - lo);
      double f1 = eval(x1), f2 = eval(x2);
      while (hi - lo > tol) {
        if (f1 <= f2) {
          hi = x2;
          x2 = x1;
          f2 = f1;
          x1 = hi - invphi * (hi - lo);
          f1 = eval(x1);
        } else {
          lo = x1;
          x1 = x2;
          f1 = f2;
          x2 = lo + invphi * (hi - lo);
          f2 = eval(x2);
        }
      }
      // Endpoints can be the minimizers of a piecewise-linear dual.
      double best_x = 0.5 * (lo + hi);
      double best_f = eval(best_x);
      for (double x : {0.0, upper_.data()[d]}) {
        const double f = eval(x);
        if (f < best_f) {
          best_f = f;
          best_x = x;
        }
      }
      lambda.data()[d] = best_x;
      return best_f;
    };
    minimize(0);
    return lambda;
  }

  Multipliers subgradient_search() const {
    Multipliers lambda = Multipliers::Zero(upper_.rows(), upper_.cols());
    Multipliers best = lambda;
    Multipliers g;
    double best_value = dual_value(lambda, &g);
    const double scale = 0.5 * std::max(1e-12, upper_.maxCoeff());
    for (int it = 0; it < opt_.subgradient_iterations; ++it) {
      const double norm = g.norm();
      if (norm < 1e-14) break;
      const double step = scale / (norm * std::sqrt(static_cast<double>(it) + 1.0));
      lambda = (lambda - step * g).cwiseMax(0.0).cwiseMin(upper_);
      const double v = dual_value(lambda, &g);
      if (v < best_value) {
        best_value = v;
        best = lambda;
      }
    }
    return best;
  }

  // Restricted master LP over the pooled vertices. Returns per-block mixture
  // weights and writes the hinge multipliers implied by its duals.
  std::vector<Vector> solve_master(Multipliers& lambda) {
    const std::size_t nb = prob_.num_samples;
    const Eigen::Index hinge_rows = static_cast<Eigen::Index>(nb) * m_;
    std::vector<Vector> mix(blocks_.size());

    Eigen::Index num_cols = 0, num_conv = 0;
    Vector hinge_const = Vector::Zero(hinge_rows);
    std::vector<Eigen::Index> first_col(blocks_.size(), -1), conv_row(blocks_.size(), -1);
    for (std::size_t g = 0; g < blocks_.size(); ++g) {
      const auto& block = blocks_[g];
      mix[g] = Vector::Zero(static_cast<Eigen::Index>(block.pool.size()));
      if (block.pool.size() == 1) {
        mix[g][0] = 1.0;
        add_hinge_coeffs(block, block.pool[0], hinge_const, 1.0);
      } else {
        first_col[g] = num_cols;
        conv_row[g] = num_conv++;
        num_cols += static_cast<Eigen::Index>(block.pool.size());
      }
    }

    if (hinge_rows == 0 || num_cols == 0) {
      lambda = upper_.cwiseMin(0.0);
      if (num_cols == 0 && hinge_rows > 0) {
        // Everything fixed; multipliers from the active hinges.
        for (Eigen::Index r = 0; r < hinge_rows; ++r) {
          const Eigen::Index i = r % m_;
          lambda.data()[row_major_index(r)] = hinge_const[r] < prob_.tau[i] ? prob_.phi[i] : 0.0;
        }
      }
      if (num_cols == 0) return mix;
    }

    const Eigen::Index nv = num_cols + hinge_rows;
    LinearProgram lp;
    lp.a = Matrix::Zero(num_conv + hinge_rows, nv);
    lp.b = Vector::Zero(num_conv + hinge_rows);
    lp.c = Vector::Zero(nv);
    lp.sense.assign(static_cast<std::size_t>(num_conv + hinge_rows), RowSense::kEqual);
    for (std::size_t g = 0; g < blocks_.size(); ++g) {
      if (first_col[g] < 0) continue;
      const auto& block = blocks_[g];
      lp.b[conv_row[g]] = 1.0;
      for (std::size_t v = 0; v < block.pool.size(); ++v) {
        const Eigen::Index col = first_col[g] + static_cast<Eigen::Index>(v);
        lp.c[col] = column_value(block, block.pool[v]);
        lp.a(conv_row[g], col) = 1.0;
        Vector coeffs = Vector::Zero(hinge_rows);
        add_hinge_coeffs(block, block.pool[v], coeffs, 1.0);
        lp.a.block(num_conv, col, hinge_rows, 1) = coeffs;
      }
    }
    const double inv_b = 1.0 / static_cast<double>(nb);
    for (Eigen::Index r = 0; r < hinge_rows; ++r) {
      const Eigen::Index i = r % m_;
      const Eigen::Index zc = num_cols + r;
      lp.c[zc] = -inv_b * prob_.phi[i];
      lp.a(num_conv + r, zc) = 1.0;
      lp.b[num_conv + r] = prob_.tau[i] - hinge_const[r];
      lp.sense[static_cast<std::size_t>(num_conv + r)] = RowSense::kGreaterEqual;
    }

    const LpSolution sol = solve_lp(lp);
    for (std::size_t g = 0; g < blocks_.size(); ++g) {
      if (first_col[g] < 0) continue;
      mix[g] = sol.x.segment(first_col[g], static_cast<Eigen::Index>(blocks_[g].pool.size())).cwiseMax(0.0);
      const double total = mix[g].sum();
      if (total <= 0.0) throw SolverError("horizon LP: empty master mixture");
      mix[g] /= total;
    }
    for (Eigen::Index r = 0; r < hinge_rows; ++r) {
      const Eigen::Index i = r % m_;
      const double lam = -static_cast<double>(nb) * sol.duals[num_conv + r];
      lambda.data()[row_major_index(r)] = std::clamp(lam, 0.0, prob_.phi[i]);
    }
    return mix;
  }

  // lambda is B x m column-major; hinge rows are ordered (b, i) with i fastest.
  Eigen::Index row_major_index(Eigen::Index r) const {
    const Eigen::Index b = r / m_, i = r % m_;
    return i * static_cast<Eigen::Index>(prob_.num_samples) + b;
  }

  void add_hinge_coeffs(const SlotBlock& block, const Permutation& perm, Vector& coeffs, double scale) const {
    const Vector expo = exposure_of(perm, prob_.weights.e);
    for (const auto& [b, w] : block.by_sample) {
      coeffs.segment(static_cast<Eigen::Index>(b) * m_, m_) += scale * (w * expo);
    }
  }

  // Adds every block argmax that beats the block's pooled columns at lambda.
  bool price(const Multipliers& lambda) {
    bool added = false;
    for (std::size_t g = 0; g < blocks_.size(); ++g) {
      const Matrix score = block_score(blocks_[g], lambda);
      const Permutation perm = solve_assignment(score);
      const double candidate = assignment_value(score, perm);
      double pooled = -std::numeric_limits<double>::infinity();
      for (const auto& p : blocks_[g].pool) pooled = std::max(pooled, assignment_value(score, p));
      if (candidate > pooled + 1e-10 * (1.0 + std::abs(pooled)) &&
          std::find(blocks_[g].pool.begin(), blocks_[g].pool.end(), perm) == blocks_[g].pool.end()) {
        blocks_[g].pool.push_back(perm);
        added = true;
      }
    }
    return added;
  }

  const HorizonProblem& prob_;
  HorizonOptions opt_;
  std::size_t n_ = 0;
  Eigen::Index m_ = 0;
  std::vector<SlotBlock> blocks_;
  Multipliers upper_;
};

}  // namespace

HorizonSolution solve_horizon_lp(const HorizonProblem& problem, const HorizonOptions& options) {
  HorizonSolver solver(problem, options);
  return solver.solve();
}

HorizonSolution solve_horizon_lp(std::span<const Context> contexts, std::span<const double> weights,
                                 const InterventionSpec& spec, const HorizonOptions& options) {
  if (!weights.empty() && weights.size() != contexts.size()) {
    throw InvalidInput("horizon LP: one weight per context required");
  }
  HorizonProblem problem;
  problem.num_slots = contexts.size();
  problem.num_samples = 1;
  problem.tau = spec.tau;
  problem.phi = spec.phi;
  problem.weights = spec.weights;
  problem.terms.reserve(contexts.size());
  for (std::size_t t = 0; t < contexts.size(); ++t) {
    problem.terms.push_back({contexts[t], weights.empty() ? 1.0 : weights[t], t, 0});
  }
  return solve_horizon_lp(problem, options);
}

double horizon_objective(const HorizonProblem& problem, std::span<const RankingPolicy> policies) {
  if (policies.size() != problem.num_slots) throw InvalidInput("horizon objective: one policy per slot required");
  const double inv_b = 1.0 / static_cast<double>(problem.num_samples);
  const Eigen::Index m = problem.tau.size();
  Matrix reached = Matrix::Zero(static_cast<Eigen::Index>(problem.num_samples), m);
  double util = 0.0;
  for (const auto& term : problem.terms) {
    const RankingPolicy& pol = policies[term.slot];
    util += inv_b * term.weight * utility(term.context, pol, problem.weights);
    if (m > 0) {
      reached.row(static_cast<Eigen::Index>(term.sample)) +=
          term.weight * progress(term.context, pol, problem.weights).transpose();
    }
  }
  double penalty = 0.0;
  for (Eigen::Index b = 0; b < reached.rows(); ++b) {
    penalty += inv_b * violation_cost(problem.tau, problem.phi, reached.row(b).transpose());
  }
  return util - penalty;
}

}  // namespace rankctl
