#include "rankctl/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace rankctl {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidInput(what);
}

void check_weights_match(const Context& ctx, std::size_t n, const PositionWeights& w) {
  require(ctx.num_items() == n && w.size() == n,
          "dimension mismatch: context has " + std::to_string(ctx.num_items()) +
              " items, policy " + std::to_string(n) + ", weights " + std::to_string(w.size()));
}

}  // namespace

Context make_context(int t, Vector relevance, Matrix groups) {
  require(relevance.size() > 0, "context needs at least one item");
  require(relevance.allFinite(), "relevance must be finite");
  require(groups.cols() == relevance.size(),
          "W has " + std::to_string(groups.cols()) + " columns, expected " +
              std::to_string(relevance.size()));
  require(groups.allFinite(), "W must be finite");
  require(groups.size() == 0 || groups.minCoeff() >= 0.0, "W must be nonnegative");
  relevance = relevance.cwiseMax(0.0).cwiseMin(1.0);
  return Context{t, std::move(relevance), std::move(groups)};
}

PositionWeights make_position_weights(Vector u, Vector e, std::optional<std::size_t> cutoff_k) {
  require(u.size() > 0, "position weights must be non-empty");
  require(u.size() == e.size(), "u and e must have equal length");
  require(u.allFinite() && e.allFinite(), "position weights must be finite");
  require(e.minCoeff() >= 0.0, "e must be nonnegative");
  if (cutoff_k) {
    for (Eigen::Index k = static_cast<Eigen::Index>(*cutoff_k); k < u.size(); ++k) {
      u[k] = 0.0;
      e[k] = 0.0;
    }
  }
  for (Eigen::Index k = 1; k < u.size(); ++k) {
    require(u[k] <= u[k - 1], "u must be non-increasing in position");
  }
  return PositionWeights{std::move(u), std::move(e), cutoff_k};
}

Vector dcg_weights(std::size_t n, std::optional<std::size_t> cutoff_k) {
  require(n >= 1, "dcg_weights: n must be >= 1");
  Vector w(static_cast<Eigen::Index>(n));
  for (std::size_t k = 1; k <= n; ++k) {
    const bool kept = !cutoff_k || k <= *cutoff_k;
    w[static_cast<Eigen::Index>(k - 1)] = kept ? 1.0 / std::log2(static_cast<double>(k) + 1.0) : 0.0;
  }
  return w;
}

Vector rr_weights(std::size_t n, std::optional<std::size_t> cutoff_k) {
  require(n >= 1, "rr_weights: n must be >= 1");
  Vector w(static_cast<Eigen::Index>(n));
  for (std::size_t k = 1; k <= n; ++k) {
    const bool kept = !cutoff_k || k <= *cutoff_k;
    w[static_cast<Eigen::Index>(k - 1)] = kept ? 1.0 / static_cast<double>(k) : 0.0;
  }
  return w;
}

RankingPolicy RankingPolicy::from_matrix(Matrix sigma) {
  require(sigma.rows() == sigma.cols() && sigma.rows() > 0, "policy must be a non-empty square matrix");
  require(sigma.allFinite(), "policy must be finite");
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    double& x = sigma.data()[i];
    require(x >= -1e-12, "policy entry below zero: " + std::to_string(x));
    if (x < 0.0) x = 0.0;
  }
  for (Eigen::Index k = 0; k < sigma.rows(); ++k) {
    require(std::abs(sigma.row(k).sum() - 1.0) <= kStochasticTol,
            "policy row " + std::to_string(k) + " does not sum to 1");
    require(std::abs(sigma.col(k).sum() - 1.0) <= kStochasticTol,
            "policy column " + std::to_string(k) + " does not sum to 1");
  }
  return RankingPolicy(std::move(sigma));
}

RankingPolicy RankingPolicy::identity(std::size_t n) {
  const auto dim = static_cast<Eigen::Index>(n);
  return RankingPolicy(Matrix::Identity(dim, dim));
}

bool RankingPolicy::is_permutation(double tol) const {
  for (Eigen::Index i = 0; i < sigma_.size(); ++i) {
    const double x = sigma_.data()[i];
    if (std::abs(x) > tol && std::abs(x - 1.0) > tol) return false;
  }
  return true;
}

Permutation RankingPolicy::to_permutation() const {
  std::vector<std::size_t> order(size());
  for (Eigen::Index k = 0; k < sigma_.rows(); ++k) {
    Eigen::Index best = 0;
    sigma_.row(k).maxCoeff(&best);
    order[static_cast<std::size_t>(k)] = static_cast<std::size_t>(best);
  }
  return Permutation::from_item_order(std::move(order));
}

Permutation Permutation::from_item_order(std::vector<std::size_t> item_at) {
  const std::size_t n = item_at.size();
  require(n > 0, "permutation must be non-empty");
  std::vector<std::size_t> position_of(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    require(item_at[k] < n && position_of[item_at[k]] == n, "not a bijection");
    position_of[item_at[k]] = k;
  }
  Permutation p;
  p.item_at_ = std::move(item_at);
  p.position_of_ = std::move(position_of);
  return p;
}

Permutation Permutation::identity(std::size_t n) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  return from_item_order(std::move(order));
}

RankingPolicy Permutation::to_policy() const {
  const auto n = static_cast<Eigen::Index>(size());
  Matrix sigma = Matrix::Zero(n, n);
  for (std::size_t k = 0; k < size(); ++k) {
    sigma(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(item_at_[k])) = 1.0;
  }
  return RankingPolicy::from_matrix(std::move(sigma));
}

void InterventionSpec::validate() const {
  require(tau.size() == phi.size(), "tau and phi must have equal length");
  require(horizon >= 1, "horizon must be >= 1");
  require(tau.allFinite() && phi.allFinite(), "tau and phi must be finite");
  require(tau.size() == 0 || tau.minCoeff() >= 0.0, "tau must be nonnegative");
  require(phi.size() == 0 || phi.minCoeff() >= 0.0, "phi must be nonnegative");
  require(weights.u.size() == weights.e.size() && weights.u.size() > 0, "position weights unset");
}

double utility(const Context& ctx, const RankingPolicy& policy, const PositionWeights& w) {
  check_weights_match(ctx, policy.size(), w);
  return w.u.dot(policy.matrix() * ctx.relevance);
}

double utility(const Context& ctx, const Permutation& perm, const PositionWeights& w) {
  check_weights_match(ctx, perm.size(), w);
  double total = 0.0;
  for (std::size_t k = 0; k < perm.size(); ++k) {
    total += ctx.relevance[static_cast<Eigen::Index>(perm.item_at(k))] * w.u[static_cast<Eigen::Index>(k)];
  }
  return total;
}

Vector progress(const Context& ctx, const RankingPolicy& policy, const PositionWeights& w) {
  check_weights_match(ctx, policy.size(), w);
  return ctx.groups * (policy.matrix().transpose() * w.e);
}

Vector progress(const Context& ctx, const Permutation& perm, const PositionWeights& w) {
  check_weights_match(ctx, perm.size(), w);
  Vector exposure(static_cast<Eigen::Index>(perm.size()));
  for (std::size_t k = 0; k < perm.size(); ++k) {
    exposure[static_cast<Eigen::Index>(perm.item_at(k))] = w.e[static_cast<Eigen::Index>(k)];
  }
  return ctx.groups * exposure;
}

Vector hinge(const Vector& x) { return x.cwiseMax(0.0); }

Vector clip(const Vector& x, const Vector& upper) { return x.cwiseMax(0.0).cwiseMin(upper); }

double violation_cost(const Vector& tau, const Vector& phi, const Vector& s) {
  require(tau.size() == phi.size() && tau.size() == s.size(), "violation_cost: length mismatch");
  return phi.dot(hinge(tau - s));
}

double violation_cost(const InterventionSpec& spec, const ProgressState& terminal) {
  return violation_cost(spec.tau, spec.phi, terminal.s);
}

double episode_objective(std::span<const double> utilities, const InterventionSpec& spec,
                         const ProgressState& terminal) {
  require(utilities.size() == static_cast<std::size_t>(spec.horizon),
          "episode_objective: expected " + std::to_string(spec.horizon) + " utilities, got " +
              std::to_string(utilities.size()));
  double total = 0.0;
  for (double u : utilities) total += u;
  return total - violation_cost(spec, terminal);
}

Permutation argsort_descending(const Vector& scores) {
  std::vector<std::size_t> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[static_cast<Eigen::Index>(a)] > scores[static_cast<Eigen::Index>(b)];
  });
  return Permutation::from_item_order(std::move(order));
}

}  // namespace rankctl
