#pragma once

#include "rankctl/core.hpp"

#include <cstdint>
#include <vector>

namespace rankctl {

struct BvnComponent {
  double weight = 0.0;
  Permutation perm;
};

// Convex combination of permutation matrices.
struct BvnDecomposition {
  std::vector<BvnComponent> components;

  Matrix reconstruct() const;
};

// Birkhoff-von Neumann peeling. Each step extracts the perfect matching on
// entries >= eps whose smallest entry is largest (bottleneck matching), with
// ties resolved toward lower item indices, and subtracts it with that weight.
// Residual mass below n * eps is discarded and the weights renormalized.
// Throws InvalidInput if no positive perfect matching exists before the mass
// is exhausted.
BvnDecomposition decompose(const RankingPolicy& policy, double eps = 1e-9);

// Draws component i with probability weight_i using a seeded mt19937_64.
Permutation sample(const BvnDecomposition& dec, std::uint64_t seed);

}  // namespace rankctl
