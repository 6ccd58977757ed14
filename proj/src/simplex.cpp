#include "rankctl/simplex.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace rankctl {

namespace {

using Tableau = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Simplex {
 public:
  Simplex(const LinearProgram& lp, const SimplexOptions& opt) : opt_(opt) { build(lp); }

  LpSolution run() {
    if (num_artificial_ > 0) {
      set_phase_one_objective();
      iterate(/*allow_artificial=*/true);
      const double infeasibility = tableau_(rows_, rhs_col_);  // = -(phase 1 objective)
      if (infeasibility > opt_.feasibility_tol) {
        throw SolverError("simplex: infeasible program (phase 1 residual " +
                          std::to_string(infeasibility) + ")");
      }
      drive_out_artificials();
    }
    set_phase_two_objective();
    iterate(/*allow_artificial=*/false);
    return extract();
  }

 private:
  void build(const LinearProgram& lp) {
    rows_ = static_cast<Eigen::Index>(lp.b.size());
    vars_ = static_cast<Eigen::Index>(lp.c.size());
    if (lp.a.rows() != rows_ || lp.a.cols() != vars_ || lp.sense.size() != static_cast<std::size_t>(rows_)) {
      throw InvalidInput("simplex: inconsistent program dimensions");
    }
    Eigen::Index slacks = 0;
    for (RowSense s : lp.sense) slacks += (s == RowSense::kEqual) ? 0 : 1;

    flipped_.assign(static_cast<std::size_t>(rows_), false);
    init_basis_col_.assign(static_cast<std::size_t>(rows_), -1);
    std::vector<bool> needs_artificial(static_cast<std::size_t>(rows_), true);
    for (Eigen::Index i = 0; i < rows_; ++i) {
      const bool neg = lp.b[i] < 0.0;
      flipped_[static_cast<std::size_t>(i)] = neg;
      // A <= row with nonnegative rhs starts with its slack in the basis.
      if (lp.sense[static_cast<std::size_t>(i)] == RowSense::kLessEqual && !neg) {
        needs_artificial[static_cast<std::size_t>(i)] = false;
      }
    }
    num_artificial_ = 0;
    for (bool need : needs_artificial) num_artificial_ += need ? 1 : 0;

    art_begin_ = vars_ + slacks;
    cols_ = art_begin_ + num_artificial_;
    rhs_col_ = cols_;
    tableau_ = Tableau::Zero(rows_ + 1, cols_ + 1);
    cost_ = Vector::Zero(cols_);
    cost_.head(vars_) = lp.c;
    basis_.assign(static_cast<std::size_t>(rows_), -1);

    Eigen::Index slack_col = vars_;
    Eigen::Index art_col = art_begin_;
    for (Eigen::Index i = 0; i < rows_; ++i) {
      const double sign = flipped_[static_cast<std::size_t>(i)] ? -1.0 : 1.0;
      tableau_.row(i).head(vars_) = sign * lp.a.row(i);
      tableau_(i, rhs_col_) = sign * lp.b[i];
      const RowSense s = lp.sense[static_cast<std::size_t>(i)];
      if (s != RowSense::kEqual) {
        tableau_(i, slack_col) = sign * (s == RowSense::kLessEqual ? 1.0 : -1.0);
        if (!needs_artificial[static_cast<std::size_t>(i)]) {
          basis_[static_cast<std::size_t>(i)] = slack_col;
          init_basis_col_[static_cast<std::size_t>(i)] = slack_col;
        }
        ++slack_col;
      }
      if (needs_artificial[static_cast<std::size_t>(i)]) {
        tableau_(i, art_col) = 1.0;
        basis_[static_cast<std::size_t>(i)] = art_col;
        init_basis_col_[static_cast<std::size_t>(i)] = art_col;
        ++art_col;
      }
    }
  }

  bool is_artificial(Eigen::Index col) const { return col >= art_begin_ && col < cols_; }

  void set_phase_one_objective() {
    // maximize -sum(artificials); reduced costs r_j = c_j - c_B B^{-1} A_j.
    tableau_.row(rows_).setZero();
    for (Eigen::Index j = art_begin_; j < cols_; ++j) tableau_(rows_, j) = -1.0;
    for (Eigen::Index i = 0; i < rows_; ++i) {
      if (is_artificial(basis_[static_cast<std::size_t>(i)])) tableau_.row(rows_) += tableau_.row(i);
    }
  }

  void set_phase_two_objective() {
    tableau_.row(rows_).setZero();
    tableau_.row(rows_).head(cols_) = cost_.transpose();
    for (Eigen::Index i = 0; i < rows_; ++i) {
      const double cb = cost_[basis_[static_cast<std::size_t>(i)]];
      if (cb != 0.0) tableau_.row(rows_) -= cb * tableau_.row(i);
    }
  }

  void pivot(Eigen::Index p, Eigen::Index q) {
    tableau_.row(p) /= tableau_(p, q);
    for (Eigen::Index i = 0; i <= rows_; ++i) {
      if (i == p) continue;
      const double f = tableau_(i, q);
      if (f != 0.0) tableau_.row(i) -= f * tableau_.row(p);
    }
    basis_[static_cast<std::size_t>(p)] = q;
  }

  void iterate(bool allow_artificial) {
    int degenerate_run = 0;
    while (true) {
      if (++iterations_ > opt_.max_iterations) {
        throw SolverError("simplex: iteration limit reached (" + std::to_string(opt_.max_iterations) + ")");
      }
      const bool bland = degenerate_run >= opt_.degenerate_before_bland;
      const Eigen::Index limit = allow_artificial ? cols_ : art_begin_;
      Eigen::Index q = -1;
      double best = opt_.optimality_tol;
      for (Eigen::Index j = 0; j < limit; ++j) {
        const double r = tableau_(rows_, j);
        if (r > best) {
          q = j;
          if (bland) break;
          best = r;
        }
      }
      if (q < 0) return;

      Eigen::Index p = -1;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < rows_; ++i) {
        const double a = tableau_(i, q);
        if (a <= opt_.pivot_tol) continue;
        const double ratio = std::max(tableau_(i, rhs_col_), 0.0) / a;
        if (p < 0 || ratio < best_ratio - 1e-14) {
          p = i;
          best_ratio = ratio;
        } else if (ratio <= best_ratio + 1e-14) {
          const bool prefer = bland ? basis_[static_cast<std::size_t>(i)] < basis_[static_cast<std::size_t>(p)]
                                    : a > tableau_(p, q);
          if (prefer) {
            p = i;
            best_ratio = std::min(best_ratio, ratio);
          }
        }
      }
      if (p < 0) throw SolverError("simplex: unbounded program");
      degenerate_run = (best_ratio <= 1e-13) ? degenerate_run + 1 : 0;
      pivot(p, q);
    }
  }

  void drive_out_artificials() {
    for (Eigen::Index i = 0; i < rows_; ++i) {
      if (!is_artificial(basis_[static_cast<std::size_t>(i)])) continue;
      Eigen::Index q = -1;
      double best = opt_.pivot_tol;
      for (Eigen::Index j = 0; j < art_begin_; ++j) {
        const double a = std::abs(tableau_(i, j));
        if (a > best) {
          best = a;
          q = j;
        }
      }
      if (q >= 0) pivot(i, q);
      // Otherwise the row is redundant; its artificial stays basic at zero.
    }
  }

  LpSolution extract() const {
    LpSolution sol;
    sol.iterations = iterations_;
    sol.x = Vector::Zero(vars_);
    for (Eigen::Index i = 0; i < rows_; ++i) {
      const Eigen::Index col = basis_[static_cast<std::size_t>(i)];
      if (col < vars_) sol.x[col] = std::max(tableau_(i, rhs_col_), 0.0);
    }
    sol.objective = cost_.head(vars_).dot(sol.x);
    sol.duals.resize(rows_);
    for (Eigen::Index i = 0; i < rows_; ++i) {
      const Eigen::Index col = init_basis_col_[static_cast<std::size_t>(i)];
      // Initial basis columns have zero phase-2 cost, so y_i = -r_col.
      const double y = -tableau_(rows_, col);
      sol.duals[i] = flipped_[static_cast<std::size_t>(i)] ? -y : y;
    }
    return sol;
  }

  SimplexOptions opt_;
  Tableau tableau_;
  Vector cost_;
  std::vector<Eigen::Index> basis_;
  std::vector<Eigen::Index> init_basis_col_;
  std::vector<bool> flipped_;
  Eigen::Index rows_ = 0, vars_ = 0, cols_ = 0, art_begin_ = 0, rhs_col_ = 0;
  Eigen::Index num_artificial_ = 0;
  int iterations_ = 0;
};

}  // namespace

LpSolution solve_lp(const LinearProgram& lp, const SimplexOptions& options) {
  Simplex simplex(lp, options);
  return simplex.run();
}

}  // namespace rankctl
