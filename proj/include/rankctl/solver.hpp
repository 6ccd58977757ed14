#pragma once

// Exact optimization over the Birkhoff polytope.
//
//  * solve_hinge_lp: one step, linear score minus a weighted hinge on the
//    macro progress W Sigma^T e. Dense simplex over n^2 + m variables.
//  * solve_horizon_lp: many steps coupled through terminal hinges, with
//    optional policy slots shared between steps and several bootstrap
//    samples each paying their own hinge. Lagrangian dual search followed by
//    primal recovery on the vertices seen during the search.

#include "rankctl/assignment.hpp"
#include "rankctl/core.hpp"
#include "rankctl/simplex.hpp"

#include <optional>
#include <span>
#include <vector>

namespace rankctl {

// Score matrix for a linear objective: score(k, j) = r_j u_k + b_j e_k,
// where b = W^T lambda is the per-item multiplier boost.
Matrix linear_score(const Vector& relevance, const Vector& item_boost, const PositionWeights& w);

struct HingeProgram {
  Matrix score;      // n x n, positions x items
  Vector targets;    // residual hinge targets, length m
  Vector costs;      // phi, length m
  Matrix groups;     // W, m x n
  Vector exposure;   // e, length n
};

struct HingeSolution {
  RankingPolicy policy;
  double objective = 0.0;  // <score, Sigma> - costs^T slack
  Vector slack;            // (targets - W Sigma^T e)_+
};

// base(Sigma) - costs^T (targets - W Sigma^T e)_+ for any policy.
double hinge_objective(const HingeProgram& prog, const Matrix& sigma);

HingeSolution solve_hinge_lp(const HingeProgram& prog);

// Horizon problem. Each term t belongs to one bootstrap sample and one policy
// slot; the objective is
//
//   (1/B) sum_b [ sum_{t in b} w_t r_t^T Sigma_slot(t) u
//                 - phi^T (tau - sum_{t in b} w_t W_t Sigma_slot(t) e)_+ ].
struct HorizonTerm {
  Context context;
  double weight = 1.0;
  std::size_t slot = 0;
  std::size_t sample = 0;
};

struct HorizonProblem {
  std::vector<HorizonTerm> terms;
  std::size_t num_slots = 0;
  std::size_t num_samples = 1;
  Vector tau;
  Vector phi;
  PositionWeights weights;
};

struct HorizonOptions {
  double dual_tol = 1e-6;         // dual search tolerance (absolute, in lambda units)
  int subgradient_iterations = 300;
  int max_refinements = 200;      // primal-recovery rounds
  double optimality_gap = 1e-6;
};

struct HorizonSolution {
  std::vector<RankingPolicy> policies;  // one per slot
  double objective = 0.0;               // primal value of the returned policies
  double dual_bound = 0.0;              // Lagrangian upper bound
  int refinements = 0;
};

HorizonSolution solve_horizon_lp(const HorizonProblem& problem, const HorizonOptions& options = {});

// One slot per context, a single sample.
HorizonSolution solve_horizon_lp(std::span<const Context> contexts, std::span<const double> weights,
                                 const InterventionSpec& spec, const HorizonOptions& options = {});

// Objective of an explicit slot assignment under the horizon problem.
double horizon_objective(const HorizonProblem& problem, std::span<const RankingPolicy> policies);

}  // namespace rankctl
