#include "rankctl/core.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace rankctl;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

Matrix row(std::initializer_list<double> xs) { return vec(xs).transpose(); }

InterventionSpec spec1(double tau, double phi, int horizon, std::size_t n) {
  InterventionSpec s;
  s.tau = vec({tau});
  s.phi = vec({phi});
  s.horizon = horizon;
  s.weights = make_position_weights(dcg_weights(n), rr_weights(n));
  return s;
}

}  // namespace

TEST_CASE("dcg weights") {
  const Vector w = dcg_weights(3);
  CHECK(w[0] == doctest::Approx(1.0));
  CHECK(w[1] == doctest::Approx(0.63093).epsilon(1e-5));
  CHECK(w[2] == doctest::Approx(0.5));
  CHECK(dcg_weights(1)[0] == 1.0);
  const Vector cut = dcg_weights(8, 4);
  for (int k = 4; k < 8; ++k) CHECK(cut[k] == 0.0);
  CHECK(cut[3] > 0.0);
  CHECK_THROWS_AS(dcg_weights(0), InvalidInput);
}

TEST_CASE("rr weights") {
  const Vector w = rr_weights(4);
  CHECK(w[0] == 1.0);
  CHECK(w[1] == 0.5);
  CHECK(w[2] == doctest::Approx(1.0 / 3.0));
  CHECK(w[3] == 0.25);
  CHECK(rr_weights(1)[0] == 1.0);
  CHECK(rr_weights(8, 4)[4] == 0.0);
  CHECK_THROWS_AS(rr_weights(0), InvalidInput);
}

TEST_CASE("position weights validation") {
  CHECK_THROWS_AS(make_position_weights(vec({0.5, 1.0}), vec({1.0, 1.0})), InvalidInput);
  CHECK_THROWS_AS(make_position_weights(vec({1.0, 0.5}), vec({1.0, -1.0})), InvalidInput);
  CHECK_THROWS_AS(make_position_weights(vec({1.0, 0.5}), vec({1.0})), InvalidInput);
  // Non-monotone exposure weights are allowed.
  CHECK_NOTHROW(make_position_weights(vec({1.0, 0.5}), vec({0.2, 1.0})));
  const auto w = make_position_weights(vec({1.0, 0.5, 0.2}), vec({1.0, 0.5, 0.2}), 2);
  CHECK(w.u[2] == 0.0);
  CHECK(w.e[2] == 0.0);
}

TEST_CASE("context validation clamps relevance") {
  const Context c = make_context(1, vec({-0.5, 1.5}), row({1, 0}));
  CHECK(c.relevance[0] == 0.0);
  CHECK(c.relevance[1] == 1.0);
  CHECK_THROWS_AS(make_context(1, vec({0.1, 0.2}), row({1, -1})), InvalidInput);
  CHECK_THROWS_AS(make_context(1, vec({0.1, 0.2}), row({1})), InvalidInput);
  CHECK_THROWS_AS(make_context(1, vec({std::nan(""), 0.2}), row({1, 0})), InvalidInput);
}

TEST_CASE("ranking policy and permutation") {
  Matrix bad(2, 2);
  bad << 0.6, 0.6, 0.4, 0.4;
  CHECK_THROWS_AS(RankingPolicy::from_matrix(bad), InvalidInput);
  Matrix half = Matrix::Constant(2, 2, 0.5);
  const auto p = RankingPolicy::from_matrix(half);
  CHECK_FALSE(p.is_permutation());
  CHECK_THROWS_AS(p.to_permutation(), InvalidInput);
  const Permutation perm = Permutation::from_item_order({2, 0, 1});
  CHECK(perm.position_of(2) == 0);
  CHECK(perm.item_at(2) == 1);
  CHECK(perm.to_policy().is_permutation());
  CHECK(perm.to_policy().to_permutation() == perm);
  CHECK_THROWS_AS(Permutation::from_item_order({0, 0, 1}), InvalidInput);
}

TEST_CASE("utility examples") {
  const auto w = make_position_weights(vec({1.0, 0.5}), vec({1.0, 0.5}));
  const Context c = make_context(1, vec({1.0, 0.0}), row({1, 0}));
  CHECK(utility(c, RankingPolicy::identity(2), w) == 1.0);
  const Context flat = make_context(1, vec({0.5, 0.5}), row({1, 1}));
  CHECK(utility(flat, RankingPolicy::from_matrix(Matrix::Constant(2, 2, 0.5)), w) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(utility(flat, Permutation::from_item_order({1, 0}), w) == doctest::Approx(0.75));

  // Best of all 6 orders, by brute force.
  const auto w3 = make_position_weights(dcg_weights(3), dcg_weights(3));
  const Context c3 = make_context(1, vec({0.2, 0.9, 0.4}), Matrix::Zero(1, 3));
  double best = 0;
  for (const auto& order : oracle::all_orders(3)) {
    best = std::max(best, utility(c3, Permutation::from_item_order(order), w3));
  }
  CHECK(best == doctest::Approx(1.25237).epsilon(1e-5));
}

TEST_CASE("progress examples") {
  const auto w = make_position_weights(vec({1.0, 0.5}), vec({1.0, 0.5}));
  CHECK(progress(make_context(1, vec({0.3, 0.4}), row({1, 0})), RankingPolicy::identity(2), w)[0] == 1.0);
  const auto half = RankingPolicy::from_matrix(Matrix::Constant(2, 2, 0.5));
  CHECK(progress(make_context(1, vec({0.3, 0.4}), row({0, 0})), half, w)[0] == 0.0);
  CHECK(progress(make_context(1, vec({0.3, 0.4}), row({1, 1})), half, w)[0] == doctest::Approx(1.5));
}

TEST_CASE("permutation and matrix forms agree") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(0, 1);
  const std::size_t n = 5;
  const auto w = make_position_weights(dcg_weights(n), rr_weights(n));
  for (int trial = 0; trial < 20; ++trial) {
    Vector r(5);
    Matrix W(2, 5);
    for (int j = 0; j < 5; ++j) {
      r[j] = unif(rng);
      W(0, j) = unif(rng);
      W(1, j) = unif(rng);
    }
    const Context c = make_context(1, r, W);
    auto order = oracle::all_orders(n)[static_cast<std::size_t>(trial * 5)];
    const auto perm = Permutation::from_item_order(order);
    CHECK(utility(c, perm, w) == doctest::Approx(utility(c, perm.to_policy(), w)).epsilon(1e-14));
    CHECK((progress(c, perm, w) - progress(c, perm.to_policy(), w)).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("utility and progress are linear in the policy") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(0, 1);
  const auto w = make_position_weights(dcg_weights(6), rr_weights(6));
  for (int trial = 0; trial < 50; ++trial) {
    Vector r(6);
    Matrix W(2, 6);
    for (int j = 0; j < 6; ++j) {
      r[j] = unif(rng);
      W(0, j) = unif(rng);
      W(1, j) = unif(rng) < 0.5 ? 1.0 : 0.0;
    }
    const Context c = make_context(1, r, W);
    const Matrix a = oracle::random_doubly_stochastic(6, rng);
    const Matrix b = oracle::random_doubly_stochastic(6, rng);
    const double alpha = unif(rng);
    const auto pa = RankingPolicy::from_matrix(a);
    const auto pb = RankingPolicy::from_matrix(b);
    const auto pm = RankingPolicy::from_matrix(alpha * a + (1 - alpha) * b);
    CHECK(std::abs(utility(c, pm, w) - (alpha * utility(c, pa, w) + (1 - alpha) * utility(c, pb, w))) <= 1e-12);
    const Vector mixed = alpha * progress(c, pa, w) + (1 - alpha) * progress(c, pb, w);
    CHECK((progress(c, pm, w) - mixed).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("violation cost examples") {
  CHECK(violation_cost(vec({5}), vec({3}), vec({7})) == 0.0);
  CHECK(violation_cost(vec({5}), vec({2}), vec({3})) == 4.0);
  CHECK(violation_cost(vec({4, 1}), vec({1, 10}), vec({3, 2})) == 1.0);
}

TEST_CASE("violation cost is nonnegative, convex, and zero above target") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> unif(-5, 5);
  const Vector tau = vec({1.0, 2.0, 0.5});
  const Vector phi = vec({0.3, 2.0, 1.0});
  for (int trial = 0; trial < 200; ++trial) {
    Vector a(3), b(3);
    for (int i = 0; i < 3; ++i) {
      a[i] = unif(rng);
      b[i] = unif(rng);
    }
    const double alpha = (unif(rng) + 5) / 10;
    CHECK(violation_cost(tau, phi, a) >= 0.0);
    CHECK(violation_cost(tau, phi, alpha * a + (1 - alpha) * b) <=
          alpha * violation_cost(tau, phi, a) + (1 - alpha) * violation_cost(tau, phi, b) + 1e-12);
    CHECK(violation_cost(tau, phi, tau + a.cwiseAbs()) == 0.0);
  }
}

TEST_CASE("episode objective") {
  auto spec = spec1(0.0, 0.0, 2, 2);
  std::vector<double> u = {1.0, 1.0};
  CHECK(episode_objective(u, spec, {vec({0.0}), 2}) == 2.0);
  spec = spec1(3.0, 1.0, 2, 2);
  CHECK(episode_objective(u, spec, {vec({1.0}), 2}) == 0.0);
  std::vector<double> short_u = {1.0};
  CHECK_THROWS_AS(episode_objective(short_u, spec, {vec({1.0}), 1}), InvalidInput);
}

TEST_CASE("progress state additivity") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> unif(0, 2);
  ProgressState st = ProgressState::zero(2);
  std::vector<Vector> steps;
  for (int t = 0; t < 100; ++t) {
    steps.push_back(vec({unif(rng), unif(rng)}));
    st.advance(steps.back());
  }
  Vector replay = Vector::Zero(2);
  for (const auto& s : steps) replay += s;
  CHECK(st.t_done == 100);
  CHECK(st.s == replay);
}

TEST_CASE("intervention spec validation") {
  auto s = spec1(1.0, 1.0, 3, 2);
  CHECK_NOTHROW(s.validate());
  s.phi = vec({-1.0});
  CHECK_THROWS_AS(s.validate(), InvalidInput);
  s = spec1(-1.0, 1.0, 3, 2);
  CHECK_THROWS_AS(s.validate(), InvalidInput);
  s = spec1(1.0, 1.0, 0, 2);
  CHECK_THROWS_AS(s.validate(), InvalidInput);
}

TEST_CASE("argsort ties go to the lower index") {
  const Permutation p = argsort_descending(vec({0.5, 0.9, 0.5, 0.1}));
  CHECK(p.item_order() == std::vector<std::size_t>{1, 0, 2, 3});
}
