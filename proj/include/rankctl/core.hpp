#pragma once

// Domain types shared by every part of the library: contexts, position
// weights, ranking policies, permutations, intervention specs and the
// per-step utility / progress metrics.
//
// Conventions: a ranking policy is an n x n matrix with rows indexing
// positions and columns indexing items, so entry (k, j) is the probability
// that item j is shown at position k. Items, positions, constraints are
// 0-based inside the library; files and the CLI use 1-based ids.

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rankctl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kStochasticTol = 1e-9;

// Raised for malformed numeric input (dimension mismatch, NaN, ...).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when an optimizer fails to converge or hits an iteration cap.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One request: relevance of every item and the m x n intervention matrix.
struct Context {
  int t = 1;
  Vector relevance;
  Matrix groups;

  std::size_t num_items() const { return static_cast<std::size_t>(relevance.size()); }
  std::size_t num_constraints() const { return static_cast<std::size_t>(groups.rows()); }
};

// Validates and normalizes a context: relevance clamped to [0, 1], W finite
// and nonnegative, W has one column per item.
Context make_context(int t, Vector relevance, Matrix groups);

struct PositionWeights {
  Vector u;  // micro (utility) weights, non-increasing
  Vector e;  // macro (exposure) weights
  std::optional<std::size_t> cutoff_k;

  std::size_t size() const { return static_cast<std::size_t>(u.size()); }
};

// Checks u non-increasing, e nonnegative, equal lengths, and zeroes both
// vectors past cutoff_k.
PositionWeights make_position_weights(Vector u, Vector e,
                                      std::optional<std::size_t> cutoff_k = std::nullopt);

// 1 / log2(k + 1) for k <= cutoff, 0 afterwards.
Vector dcg_weights(std::size_t n, std::optional<std::size_t> cutoff_k = std::nullopt);
// 1 / k for k <= cutoff, 0 afterwards.
Vector rr_weights(std::size_t n, std::optional<std::size_t> cutoff_k = std::nullopt);

class Permutation;

// Doubly stochastic matrix over positions x items.
class RankingPolicy {
 public:
  RankingPolicy() = default;

  // Clamps entries in [-1e-12, 0) to zero and verifies unit row/column sums
  // to kStochasticTol. Throws InvalidInput otherwise.
  static RankingPolicy from_matrix(Matrix sigma);
  static RankingPolicy identity(std::size_t n);

  const Matrix& matrix() const { return sigma_; }
  std::size_t size() const { return static_cast<std::size_t>(sigma_.rows()); }

  // True when every entry is within tol of 0 or 1.
  bool is_permutation(double tol = kStochasticTol) const;
  // Position-major rounding of a near-permutation matrix.
  Permutation to_permutation() const;

 private:
  explicit RankingPolicy(Matrix sigma) : sigma_(std::move(sigma)) {}
  Matrix sigma_;
};

// A ranking: a bijection between items and positions.
class Permutation {
 public:
  Permutation() = default;
  // item_at[k] is the item shown at position k.
  static Permutation from_item_order(std::vector<std::size_t> item_at);
  static Permutation identity(std::size_t n);

  std::size_t size() const { return item_at_.size(); }
  std::size_t item_at(std::size_t position) const { return item_at_[position]; }
  std::size_t position_of(std::size_t item) const { return position_of_[item]; }
  const std::vector<std::size_t>& item_order() const { return item_at_; }

  RankingPolicy to_policy() const;

  friend bool operator==(const Permutation&, const Permutation&) = default;
  friend auto operator<=>(const Permutation& a, const Permutation& b) {
    return a.item_at_ <=> b.item_at_;
  }

 private:
  std::vector<std::size_t> item_at_;
  std::vector<std::size_t> position_of_;
};

struct InterventionSpec {
  Vector tau;
  Vector phi;
  int horizon = 1;
  PositionWeights weights;

  std::size_t num_constraints() const { return static_cast<std::size_t>(tau.size()); }
  // Throws InvalidInput when lengths disagree, phi < 0, tau < 0 or horizon < 1.
  void validate() const;
};

struct ProgressState {
  Vector s;
  int t_done = 0;

  static ProgressState zero(std::size_t m) { return {Vector::Zero(static_cast<Eigen::Index>(m)), 0}; }
  void advance(const Vector& step_progress) {
    s += step_progress;
    ++t_done;
  }
};

// u^T Sigma r, i.e. sum_j r_j u_{rank(j)} for a permutation.
double utility(const Context& ctx, const RankingPolicy& policy, const PositionWeights& w);
double utility(const Context& ctx, const Permutation& perm, const PositionWeights& w);

// W Sigma^T e: expected exposure collected by each constraint group.
Vector progress(const Context& ctx, const RankingPolicy& policy, const PositionWeights& w);
Vector progress(const Context& ctx, const Permutation& perm, const PositionWeights& w);

// Elementwise (x)_+.
Vector hinge(const Vector& x);
// Elementwise clip to [0, upper].
Vector clip(const Vector& x, const Vector& upper);

// phi^T (tau - s_T)_+
double violation_cost(const InterventionSpec& spec, const ProgressState& terminal);
double violation_cost(const Vector& tau, const Vector& phi, const Vector& s);

// Sum of per-step utilities minus the terminal violation cost.
double episode_objective(std::span<const double> utilities, const InterventionSpec& spec,
                         const ProgressState& terminal);

// Argsort descending; ties go to the lower item index.
Permutation argsort_descending(const Vector& scores);

}  // namespace rankctl
