#include "rankctl/bvn.hpp"

#include <algorithm>
#include <functional>
#include <random>
#include <string>

namespace rankctl {

namespace {

// Kuhn's augmenting paths on the support {(k, j) : r(k, j) >= threshold}.
// Positions are matched in order and items tried by increasing index.
bool perfect_matching(const Matrix& r, double threshold, std::vector<std::size_t>& item_at) {
  const auto n = static_cast<std::size_t>(r.rows());
  std::vector<std::size_t> pos_of_item(n, n);
  std::vector<char> seen(n);
  std::function<bool(std::size_t)> augment = [&](std::size_t k) {
    for (std::size_t j = 0; j < n; ++j) {
      if (seen[j] || r(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) < threshold) continue;
      seen[j] = 1;
      if (pos_of_item[j] == n || augment(pos_of_item[j])) {
        pos_of_item[j] = k;
        return true;
      }
    }
    return false;
  };
  for (std::size_t k = 0; k < n; ++k) {
    std::fill(seen.begin(), seen.end(), 0);
    if (!augment(k)) return false;
  }
  item_at.assign(n, n);
  for (std::size_t j = 0; j < n; ++j) item_at[pos_of_item[j]] = j;
  return true;
}

}  // namespace

Matrix BvnDecomposition::reconstruct() const {
  if (components.empty()) return Matrix();
  const auto n = static_cast<Eigen::Index>(components.front().perm.size());
  Matrix out = Matrix::Zero(n, n);
  for (const auto& c : components) {
    for (std::size_t k = 0; k < c.perm.size(); ++k) {
      out(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c.perm.item_at(k))) += c.weight;
    }
  }
  return out;
}

BvnDecomposition decompose(const RankingPolicy& policy, double eps) {
  Matrix residual = policy.matrix();
  const auto n = static_cast<std::size_t>(residual.rows());
  BvnDecomposition dec;
  const std::size_t max_components = n * n + 1;
  std::vector<std::size_t> item_at;

  while (residual.sum() >= static_cast<double>(n) * eps) {
    if (dec.components.size() >= max_components) {
      throw InvalidInput("bvn: component limit exceeded; input is not doubly stochastic");
    }
    std::vector<double> levels;
    levels.reserve(residual.size());
    for (Eigen::Index i = 0; i < residual.size(); ++i) {
      if (residual.data()[i] >= eps) levels.push_back(residual.data()[i]);
    }
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    if (levels.empty() || !perfect_matching(residual, levels.front(), item_at)) {
      // Leftover from entries zeroed below eps; below n * eps per row it is discarded.
      const double leftover = std::max(residual.rowwise().sum().maxCoeff(), residual.colwise().sum().maxCoeff());
      if (leftover < static_cast<double>(n) * eps && !dec.components.empty()) break;
      throw InvalidInput("bvn: no positive perfect matching with residual row mass " + std::to_string(leftover));
    }
    // Largest threshold that still admits a perfect matching.
    std::size_t lo = 0, hi = levels.size() - 1;
    while (lo < hi) {
      const std::size_t mid = (lo + hi + 1) / 2;
      std::vector<std::size_t> trial;
      if (perfect_matching(residual, levels[mid], trial)) {
        lo = mid;
      } else {
        hi = mid - 1;
      }
    }
    perfect_matching(residual, levels[lo], item_at);

    double weight = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
      weight = std::min(weight, residual(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(item_at[k])));
    }
    for (std::size_t k = 0; k < n; ++k) {
      double& x = residual(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(item_at[k]));
      x -= weight;
      if (x < eps) x = 0.0;
    }
    dec.components.push_back({weight, Permutation::from_item_order(item_at)});
  }

  double total = 0.0;
  for (const auto& c : dec.components) total += c.weight;
  if (dec.components.empty() || total <= 0.0) throw InvalidInput("bvn: empty decomposition");
  for (auto& c : dec.components) c.weight /= total;
  return dec;
}

Permutation sample(const BvnDecomposition& dec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double acc = 0.0;
  for (const auto& c : dec.components) {
    acc += c.weight;
    if (u < acc) return c.perm;
  }
  return dec.components.back().perm;
}

}  // namespace rankctl
