#include "rankctl/bvn.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <map>
#include <random>

using namespace rankctl;

namespace {

void check_invariants(const Matrix& sigma, const BvnDecomposition& dec) {
  const auto n = static_cast<std::size_t>(sigma.rows());
  double total = 0.0;
  for (const auto& c : dec.components) {
    CHECK(c.weight > 0.0);
    total += c.weight;
  }
  CHECK(std::abs(total - 1.0) <= 1e-9);
  CHECK((dec.reconstruct() - sigma).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(dec.components.size() <= (n - 1) * (n - 1) + 1);
}

}  // namespace

TEST_CASE("permutation matrix decomposes into itself") {
  const Permutation p = Permutation::from_item_order({2, 0, 3, 1});
  const BvnDecomposition dec = decompose(p.to_policy());
  REQUIRE(dec.components.size() == 1);
  CHECK(dec.components[0].weight == 1.0);
  CHECK(dec.components[0].perm == p);
  for (std::uint64_t seed = 0; seed < 20; ++seed) CHECK(sample(dec, seed) == p);
}

TEST_CASE("half identity plus half reversal") {
  const Matrix sigma = 0.5 * Permutation::identity(3).to_policy().matrix() +
                       0.5 * Permutation::from_item_order({2, 1, 0}).to_policy().matrix();
  const BvnDecomposition dec = decompose(RankingPolicy::from_matrix(sigma));
  REQUIRE(dec.components.size() == 2);
  CHECK(dec.components[0].weight == doctest::Approx(0.5));
  CHECK(dec.components[1].weight == doctest::Approx(0.5));
  check_invariants(sigma, dec);
}

TEST_CASE("random 6x6 doubly stochastic, seed 11") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Matrix m(6, 6);
  for (auto& x : m.reshaped()) x = unif(rng);
  for (int it = 0; it < 5000; ++it) {
    m = m.array().colwise() / m.rowwise().sum().array();
    m = m.array().rowwise() / m.colwise().sum().array();
  }
  const BvnDecomposition dec = decompose(RankingPolicy::from_matrix(m));
  check_invariants(m, dec);
}

TEST_CASE("invariants on random inputs") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(trial % 10);
    const Matrix m = oracle::random_doubly_stochastic(n, rng);
    const BvnDecomposition dec = decompose(RankingPolicy::from_matrix(m));
    check_invariants(m, dec);
    // Deterministic given input.
    const BvnDecomposition again = decompose(RankingPolicy::from_matrix(m));
    REQUIRE(again.components.size() == dec.components.size());
    for (std::size_t i = 0; i < dec.components.size(); ++i) {
      CHECK(again.components[i].weight == dec.components[i].weight);
      CHECK(again.components[i].perm == dec.components[i].perm);
    }
  }
}

TEST_CASE("sampling frequencies follow the weights") {
  const Matrix sigma = 0.5 * Permutation::identity(3).to_policy().matrix() +
                       0.5 * Permutation::from_item_order({1, 2, 0}).to_policy().matrix();
  const BvnDecomposition dec = decompose(RankingPolicy::from_matrix(sigma));
  std::map<std::vector<std::size_t>, int> counts;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) ++counts[sample(dec, seed * 7919 + 1).item_order()];
  REQUIRE(counts.size() == 2);
  for (const auto& [order, count] : counts) CHECK(std::abs(count / 10000.0 - 0.5) <= 0.02);
  CHECK(sample(dec, 42) == sample(dec, 42));
}

TEST_CASE("sampled progress and utility are unbiased") {
  std::mt19937_64 rng(19);
  const std::size_t n = 5;
  const Matrix m = oracle::random_doubly_stochastic(n, rng);
  const RankingPolicy policy = RankingPolicy::from_matrix(m);
  const auto w = make_position_weights(dcg_weights(n), rr_weights(n));
  Vector r(5);
  r << 0.9, 0.1, 0.5, 0.7, 0.3;
  Matrix W(1, 5);
  W << 1, 0, 1, 0, 0;
  const Context ctx = make_context(1, r, W);
  const BvnDecomposition dec = decompose(policy);
  double mean_progress = 0.0, mean_utility = 0.0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const Permutation p = sample(dec, static_cast<std::uint64_t>(i));
    mean_progress += progress(ctx, p, w)[0] / draws;
    mean_utility += utility(ctx, p, w) / draws;
  }
  CHECK(std::abs(mean_progress - progress(ctx, policy, w)[0]) <= 0.02);
  CHECK(std::abs(mean_utility - utility(ctx, policy, w)) <= 0.01 * utility(ctx, policy, w));
}

TEST_CASE("rejects matrices without a perfect matching on the support") {
  // Rows sum to one but the matrix is not doubly stochastic beyond eps.
  Matrix m(2, 2);
  m << 1, 0, 1, 0;
  CHECK_THROWS_AS(RankingPolicy::from_matrix(m), InvalidInput);
}
