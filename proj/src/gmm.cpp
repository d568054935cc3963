#include "fie/gmm.hpp"

#include "fie/parallel.hpp"
#include "fie/random.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace fie {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // log(2*pi)
constexpr Index kMonteCarloShards = 16;

void require_same_dim(Index a, Index b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (" + std::to_string(a) +
                                " vs " + std::to_string(b) + ")");
  }
}

}  // namespace

MixtureSpec MixtureSpec::uniform(Matrix means) {
  MixtureSpec spec;
  const Index p = means.rows();
  spec.means = std::move(means);
  spec.weights = Vector::Constant(p, p > 0 ? 1.0 / static_cast<double>(p) : 0.0);
  return spec;
}

void MixtureSpec::validate() const {
  if (means.rows() < 1 || means.cols() < 1) {
    throw std::invalid_argument("mixture needs at least one component and one dimension");
  }
  if (weights.size() != means.rows()) {
    throw std::invalid_argument("mixture weights length " + std::to_string(weights.size()) +
                                " does not match " + std::to_string(means.rows()) +
                                " components");
  }
  if (!means.allFinite()) throw std::invalid_argument("mixture means must be finite");
  if ((weights.array() < 0.0).any() || !weights.allFinite()) {
    throw std::invalid_argument("mixture weights must be finite and nonnegative");
  }
  if (std::abs(weights.sum() - 1.0) > 1e-12) {
    throw std::invalid_argument("mixture weights must sum to 1");
  }
}

double log_component_density(const Eigen::Ref<const RowVector>& x,
                             const Eigen::Ref<const RowVector>& mean) {
  require_same_dim(x.size(), mean.size(), "log_component_density");
  const double d = static_cast<double>(x.size());
  return -0.5 * d * kLog2Pi - 0.5 * (x - mean).squaredNorm();
}

double log_sum_exp(const Eigen::Ref<const RowVector>& values) {
  const double top = values.maxCoeff();
  if (!std::isfinite(top)) return top;
  return top + std::log((values.array() - top).exp().sum());
}

double mixture_log_density(const MixtureSpec& spec, const Eigen::Ref<const RowVector>& x) {
  require_same_dim(x.size(), spec.dim(), "mixture_log_density");
  RowVector terms(spec.components());
  for (Index j = 0; j < spec.components(); ++j) {
    terms[j] = std::log(spec.weights[j]) + log_component_density(x, spec.means.row(j));
  }
  return log_sum_exp(terms);
}

SampleSet sample_mixture(const MixtureSpec& spec, Index n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_mixture: n must be at least 1");
  spec.validate();

  std::vector<double> cumulative(static_cast<std::size_t>(spec.components()));
  double acc = 0.0;
  for (Index j = 0; j < spec.components(); ++j) {
    acc += spec.weights[j];
    cumulative[static_cast<std::size_t>(j)] = acc;
  }

  Rng rng(seed);
  SampleSet out;
  out.source_seed = seed;
  out.points.resize(n, spec.dim());
  for (Index i = 0; i < n; ++i) {
    const double u = rng.uniform01() * acc;
    Index component = spec.components() - 1;
    for (Index j = 0; j < spec.components(); ++j) {
      if (u < cumulative[static_cast<std::size_t>(j)]) {
        component = j;
        break;
      }
    }
    for (Index k = 0; k < spec.dim(); ++k) {
      out.points(i, k) = spec.means(component, k) + rng.normal();
    }
  }
  return out;
}

KlApproximation kl_matching_approx(const MixtureSpec& f, const MixtureSpec& g) {
  f.validate();
  g.validate();
  require_same_dim(f.dim(), g.dim(), "kl_matching_approx");

  double raw = 0.0;
  for (Index i = 0; i < f.components(); ++i) {
    const double pi = f.weights[i];
    if (pi == 0.0) continue;
    double best = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < g.components(); ++j) {
      const double component_kl = 0.5 * (f.means.row(i) - g.means.row(j)).squaredNorm();
      const double score = component_kl - std::log(g.weights[j]);
      if (score < best) best = score;
    }
    raw += pi * (best + std::log(pi));
  }
  return {std::max(raw, 0.0), raw};
}

MonteCarloEstimate kl_monte_carlo(const MixtureSpec& f, const MixtureSpec& g, Index n,
                                  std::uint64_t seed, unsigned threads) {
  if (n < 1000) throw std::invalid_argument("kl_monte_carlo: n must be at least 1000");
  f.validate();
  g.validate();
  require_same_dim(f.dim(), g.dim(), "kl_monte_carlo");

  // Per-shard Welford accumulators, merged in shard order afterwards.
  struct Moments {
    double count = 0.0;
    double mean = 0.0;
    double m2 = 0.0;
  };
  const Index shards = kMonteCarloShards;
  std::vector<Moments> partial(static_cast<std::size_t>(shards));

  parallel_for(static_cast<std::size_t>(shards), threads, [&](std::size_t s) {
    const Index begin = n * static_cast<Index>(s) / shards;
    const Index end = n * static_cast<Index>(s + 1) / shards;
    if (end == begin) return;
    const SampleSet draws = sample_mixture(f, end - begin, derive_seed(seed, s));
    Moments m;
    for (Index i = 0; i < draws.size(); ++i) {
      const double v = mixture_log_density(f, draws.points.row(i)) -
                       mixture_log_density(g, draws.points.row(i));
      m.count += 1.0;
      const double delta = v - m.mean;
      m.mean += delta / m.count;
      m.m2 += delta * (v - m.mean);
    }
    partial[s] = m;
  });

  Moments total;
  for (const Moments& m : partial) {
    if (m.count == 0.0) continue;
    const double count = total.count + m.count;
    const double delta = m.mean - total.mean;
    total.mean += delta * m.count / count;
    total.m2 += m.m2 + delta * delta * total.count * m.count / count;
    total.count = count;
  }
  const double variance = total.m2 / (total.count - 1.0);
  if (!std::isfinite(total.mean) || !std::isfinite(variance)) {
    throw NumericalError("kl_monte_carlo: non-finite estimate");
  }
  return {total.mean, std::sqrt(variance / total.count)};
}

void to_json(nlohmann::json& j, const MixtureSpec& spec) {
  nlohmann::json means = nlohmann::json::array();
  for (Index r = 0; r < spec.means.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Index c = 0; c < spec.means.cols(); ++c) row.push_back(spec.means(r, c));
    means.push_back(std::move(row));
  }
  nlohmann::json weights = nlohmann::json::array();
  for (Index r = 0; r < spec.weights.size(); ++r) weights.push_back(spec.weights[r]);
  j = nlohmann::json{{"weights", std::move(weights)}, {"means", std::move(means)}};
}

void from_json(const nlohmann::json& j, MixtureSpec& spec) {
  if (!j.is_object() || !j.contains("means")) {
    throw InputError("mixture spec must be an object with a \"means\" array");
  }
  const auto& means = j.at("means");
  if (!means.is_array() || means.empty() || !means.front().is_array()) {
    throw InputError("mixture \"means\" must be a nonempty array of arrays");
  }
  const Index p = static_cast<Index>(means.size());
  const Index d = static_cast<Index>(means.front().size());
  Matrix m(p, d);
  for (Index r = 0; r < p; ++r) {
    const auto& row = means.at(static_cast<std::size_t>(r));
    if (!row.is_array() || static_cast<Index>(row.size()) != d) {
      throw InputError("mixture \"means\" rows must all have length " + std::to_string(d));
    }
    for (Index c = 0; c < d; ++c) m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  if (j.contains("weights")) {
    const auto& w = j.at("weights");
    if (!w.is_array() || static_cast<Index>(w.size()) != p) {
      throw InputError("mixture \"weights\" must have one entry per mean");
    }
    spec.means = std::move(m);
    spec.weights.resize(p);
    for (Index r = 0; r < p; ++r) spec.weights[r] = w.at(static_cast<std::size_t>(r)).get<double>();
  } else {
    spec = MixtureSpec::uniform(std::move(m));
  }
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
}

}  // namespace fie
