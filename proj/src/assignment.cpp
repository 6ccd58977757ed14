#include "rankctl/assignment.hpp"

#include <limits>
#include <string>
#include <vector>

namespace rankctl {

namespace {

// Returns item_at[position] minimizing total cost.
std::vector<std::size_t> hungarian_min(const Matrix& cost) {
  const auto n = static_cast<std::size_t>(cost.rows());
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based potentials; index 0 is the virtual source column.
  std::vector<double> row_pot(n + 1, 0.0), col_pot(n + 1, 0.0);
  std::vector<std::size_t> row_of_col(n + 1, 0), way(n + 1, 0);
  std::vector<double> min_slack(n + 1);
  std::vector<char> used(n + 1);

  for (std::size_t row = 1; row <= n; ++row) {
    row_of_col[0] = row;
    std::size_t col0 = 0;
    std::fill(min_slack.begin(), min_slack.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[col0] = 1;
      const std::size_t r0 = row_of_col[col0];
      double delta = inf;
      std::size_t col1 = 0;
      for (std::size_t c = 1; c <= n; ++c) {
        if (used[c]) continue;
        const double cur = cost(static_cast<Eigen::Index>(r0 - 1), static_cast<Eigen::Index>(c - 1)) -
                           row_pot[r0] - col_pot[c];
        if (cur < min_slack[c]) {
          min_slack[c] = cur;
          way[c] = col0;
        }
        if (min_slack[c] < delta) {
          delta = min_slack[c];
          col1 = c;
        }
      }
      if (col1 == 0) throw SolverError("assignment: no augmenting path (non-finite scores?)");
      for (std::size_t c = 0; c <= n; ++c) {
        if (used[c]) {
          row_pot[row_of_col[c]] += delta;
          col_pot[c] -= delta;
        } else {
          min_slack[c] -= delta;
        }
      }
      col0 = col1;
    } while (row_of_col[col0] != 0);
    do {
      const std::size_t col1 = way[col0];
      row_of_col[col0] = row_of_col[col1];
      col0 = col1;
    } while (col0 != 0);
  }

  std::vector<std::size_t> item_at(n);
  for (std::size_t c = 1; c <= n; ++c) item_at[row_of_col[c] - 1] = c - 1;
  return item_at;
}

}  // namespace

Permutation solve_assignment(const Matrix& score) {
  if (score.rows() != score.cols() || score.rows() == 0) {
    throw InvalidInput("solve_assignment: score must be a non-empty square matrix, got " +
                       std::to_string(score.rows()) + "x" + std::to_string(score.cols()));
  }
  if (!score.allFinite()) throw InvalidInput("solve_assignment: score must be finite");

  std::vector<std::size_t> item_at = hungarian_min(-score);

  // Canonical tie-breaking: bubble lower item indices toward the top while
  // the exchange does not lose value. Each swap removes an inversion.
  const std::size_t n = item_at.size();
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t k1 = 0; k1 < n; ++k1) {
      for (std::size_t k2 = k1 + 1; k2 < n; ++k2) {
        const auto a = static_cast<Eigen::Index>(k1), b = static_cast<Eigen::Index>(k2);
        const auto ja = static_cast<Eigen::Index>(item_at[k1]), jb = static_cast<Eigen::Index>(item_at[k2]);
        if (ja < jb) continue;
        const double delta = (score(a, jb) + score(b, ja)) - (score(a, ja) + score(b, jb));
        if (delta >= 0.0) {
          std::swap(item_at[k1], item_at[k2]);
          changed = true;
        }
      }
    }
  }
  return Permutation::from_item_order(std::move(item_at));
}

double assignment_value(const Matrix& score, const Permutation& perm) {
  double total = 0.0;
  for (std::size_t k = 0; k < perm.size(); ++k) {
    total += score(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(perm.item_at(k)));
  }
  return total;
}

}  // namespace rankctl
