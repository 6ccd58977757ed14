#pragma once

// Dense two-phase primal simplex for small linear programs
//
//   maximize c^T x  subject to  A_i x (<= | >= | =) b_i,  x >= 0.
//
// Every row carries an artificial column so the final tableau holds B^{-1}
// and the row duals come for free. Pivoting uses Dantzig's rule and falls
// back to Bland's rule after a run of degenerate pivots.

#include "rankctl/core.hpp"

#include <vector>

namespace rankctl {

enum class RowSense { kLessEqual, kGreaterEqual, kEqual };

struct LinearProgram {
  Matrix a;
  Vector b;
  Vector c;
  std::vector<RowSense> sense;
};

struct LpSolution {
  Vector x;
  double objective = 0.0;
  // duals[i] = d(objective)/d(b_i) at the optimum basis.
  Vector duals;
  int iterations = 0;
};

struct SimplexOptions {
  double pivot_tol = 1e-11;
  double optimality_tol = 1e-10;
  double feasibility_tol = 1e-8;
  int max_iterations = 200000;
  int degenerate_before_bland = 50;
};

// Throws SolverError on infeasibility, unboundedness or the iteration cap.
LpSolution solve_lp(const LinearProgram& lp, const SimplexOptions& options = {});

}  // namespace rankctl
