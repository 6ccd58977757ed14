#pragma once

#include "rankctl/core.hpp"

namespace rankctl {

// Maximum-weight perfect matching of positions (rows) to items (columns).
//
// Shortest augmenting path Hungarian method, O(n^3). Among optimal
// permutations the result is canonicalized by pairwise exchanges so that an
// item with a lower index precedes a higher-index item whenever swapping them
// does not lose value; for a rank-1 score r_j u_k with strictly decreasing u
// this yields argsort(r) with ties broken by item index.
Permutation solve_assignment(const Matrix& score);

// sum_k score(k, item_at(k))
double assignment_value(const Matrix& score, const Permutation& perm);

}  // namespace rankctl
