#pragma once

#include "fie/types.hpp"

#include <json.hpp>

#include <cstdint>

namespace fie {

/// Gaussian mixture with identity covariances.
struct MixtureSpec {
  Matrix means;    // p x d
  Vector weights;  // p, nonnegative, sums to 1

  Index components() const { return means.rows(); }
  Index dim() const { return means.cols(); }

  /// Equal-weight mixture over the rows of `means`.
  static MixtureSpec uniform(Matrix means);

  /// Throws std::invalid_argument when the invariants do not hold.
  void validate() const;
};

/// A multiset of points (rows) together with the seed that produced it.
/// source_seed is 0 for multisets that were not sampled.
struct SampleSet {
  Matrix points;  // n x d
  std::uint64_t source_seed = 0;

  Index size() const { return points.rows(); }
  Index dim() const { return points.cols(); }
};

/// log N(x; mean, I).
double log_component_density(const Eigen::Ref<const RowVector>& x,
                             const Eigen::Ref<const RowVector>& mean);

/// log sum_j w_j N(x; mu_j, I), log-sum-exp stabilized.
double mixture_log_density(const MixtureSpec& spec, const Eigen::Ref<const RowVector>& x);

double log_sum_exp(const Eigen::Ref<const RowVector>& values);

/// n i.i.d. draws: component by weight, then mean + standard normal noise.
SampleSet sample_mixture(const MixtureSpec& spec, Index n, std::uint64_t seed);

struct KlApproximation {
  double value = 0.0;  // max(raw, 0)
  double raw = 0.0;
};

/// Component-matching approximation of KL(f || g) for identity-covariance
/// mixtures: each component of f is matched to the component of g that
/// minimizes KL(f_i || g_j) - log w_j.
KlApproximation kl_matching_approx(const MixtureSpec& f, const MixtureSpec& g);

struct MonteCarloEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

/// E_{x~f}[log f(x) - log g(x)] from n samples. The draw is split into a fixed
/// number of shards with seeds derived from (seed, shard) and reduced in shard
/// order, so the result does not depend on `threads`.
MonteCarloEstimate kl_monte_carlo(const MixtureSpec& f, const MixtureSpec& g, Index n,
                                  std::uint64_t seed, unsigned threads = 0);

void to_json(nlohmann::json& j, const MixtureSpec& spec);
void from_json(const nlohmann::json& j, MixtureSpec& spec);

}  // namespace fie
