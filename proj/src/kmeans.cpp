#include "fie/kmeans.hpp"

#include "fie/random.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace fie {

namespace {

bool row_less(const Matrix& m, Index a, Index b) {
  const double* pa = m.row(a).data();
  const double* pb = m.row(b).data();
  return std::lexicographical_compare(pa, pa + m.cols(), pb, pb + m.cols());
}

bool row_equal(const Matrix& m, Index a, Index b) { return m.row(a) == m.row(b); }

/// Indices of the distinct rows, in order of first appearance.
std::vector<Index> distinct_rows(const Matrix& points) {
  std::vector<Index> order(static_cast<std::size_t>(points.rows()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return row_less(points, a, b); });
  std::vector<Index> firsts;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i == 0 || !row_equal(points, order[i - 1], order[i])) firsts.push_back(order[i]);
  }
  std::sort(firsts.begin(), firsts.end());
  return firsts;
}

struct Assignment {
  std::vector<Index> labels;
  double inertia = 0.0;
};

Assignment assign(const Matrix& points, const Matrix& centers) {
  Assignment a;
  a.labels.resize(static_cast<std::size_t>(points.rows()));
  for (Index i = 0; i < points.rows(); ++i) {
    Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < centers.rows(); ++j) {
      const double d = (points.row(i) - centers.row(j)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = j;
      }
    }
    a.labels[static_cast<std::size_t>(i)] = best;
    a.inertia += best_d;
  }
  return a;
}

Matrix seed_plus_plus(const Matrix& points, Index k, Rng& rng) {
  const Index n = points.rows();
  Matrix centers(k, points.cols());
  centers.row(0) = points.row(static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(n))));
  Vector d2(n);
  for (Index i = 0; i < n; ++i) d2[i] = (points.row(i) - centers.row(0)).squaredNorm();
  for (Index c = 1; c < k; ++c) {
    const double total = d2.sum();
    Index pick = n - 1;
    if (total > 0.0) {
      const double target = rng.uniform01() * total;
      double acc = 0.0;
      for (Index i = 0; i < n; ++i) {
        acc += d2[i];
        if (target < acc && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(n)));
    }
    centers.row(c) = points.row(pick);
    for (Index i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (points.row(i) - centers.row(c)).squaredNorm());
    }
  }
  return centers;
}

/// Means of the assigned points; an empty cluster moves to the point farthest
/// from its previous center (lowest index on ties, never reusing a point).
Matrix update_centers(const Matrix& points, const Assignment& a, const Matrix& previous) {
  const Index k = previous.rows();
  Matrix sums = Matrix::Zero(k, points.cols());
  std::vector<Index> counts(static_cast<std::size_t>(k), 0);
  for (Index i = 0; i < points.rows(); ++i) {
    const Index j = a.labels[static_cast<std::size_t>(i)];
    sums.row(j) += points.row(i);
    ++counts[static_cast<std::size_t>(j)];
  }
  Matrix centers = previous;
  std::vector<char> taken(static_cast<std::size_t>(points.rows()), 0);
  for (Index j = 0; j < k; ++j) {
    const Index c = counts[static_cast<std::size_t>(j)];
    if (c > 0) {
      centers.row(j) = sums.row(j) / static_cast<double>(c);
      continue;
    }
    Index far = -1;
    double far_d = -1.0;
    for (Index i = 0; i < points.rows(); ++i) {
      if (taken[static_cast<std::size_t>(i)]) continue;
      const double d = (points.row(i) - previous.row(j)).squaredNorm();
      if (d > far_d) {
        far_d = d;
        far = i;
      }
    }
    if (far >= 0) {
      taken[static_cast<std::size_t>(far)] = 1;
      centers.row(j) = points.row(far);
    }
  }
  return centers;
}

KMeansResult lloyd(const Matrix& points, Matrix centers, const KMeansConfig& cfg) {
  KMeansResult r;
  Assignment a = assign(points, centers);
  r.inertia_trace.push_back(a.inertia);
  for (int it = 0; it < cfg.max_iters; ++it) {
    centers = update_centers(points, a, centers);
    const double previous = a.inertia;
    a = assign(points, centers);
    r.inertia_trace.push_back(a.inertia);
    if (previous - a.inertia <= cfg.tol * previous) break;
  }
  r.centers = AnchorSet{std::move(centers)};
  r.inertia = a.inertia;
  return r;
}

std::vector<Index> sample_rows(Index rows, const KMeansConfig& km, std::uint64_t seed) {
  std::vector<Index> idx;
  if (rows <= km.sample_cap) {
    idx.resize(static_cast<std::size_t>(rows));
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
  }
  Rng rng(seed);
  const auto cap = static_cast<std::size_t>(km.sample_cap);
  if (km.sample_with_replacement) {
    idx.resize(cap);
    for (auto& v : idx) v = static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(rows)));
  } else {
    // Partial Fisher-Yates shuffle.
    std::vector<Index> pool(static_cast<std::size_t>(rows));
    std::iota(pool.begin(), pool.end(), 0);
    for (std::size_t i = 0; i < cap; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.uniform_index(pool.size() - i));
      std::swap(pool[i], pool[j]);
    }
    idx.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(cap));
  }
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

void KMeansConfig::validate() const {
  if (clusters < 1) throw std::invalid_argument("k-means needs at least one cluster");
  if (max_iters < 0) throw std::invalid_argument("k-means max_iters must be >= 0");
  if (!(tol >= 0.0)) throw std::invalid_argument("k-means tol must be >= 0");
  if (restarts < 1) throw std::invalid_argument("k-means restarts must be >= 1");
  if (sample_cap < clusters) throw std::invalid_argument("sample_cap must be >= clusters");
}

KMeansResult kmeans_fit(const Matrix& points, const KMeansConfig& cfg) {
  cfg.validate();
  if (points.rows() < 1) throw std::invalid_argument("k-means needs at least one point");
  if (!points.allFinite()) throw NumericalError("k-means input contains non-finite values");

  const std::vector<Index> distinct = distinct_rows(points);
  if (static_cast<Index>(distinct.size()) <= cfg.clusters) {
    Matrix centers(cfg.clusters, points.cols());
    for (Index j = 0; j < cfg.clusters; ++j) {
      centers.row(j) = points.row(distinct[static_cast<std::size_t>(j) % distinct.size()]);
    }
    KMeansResult r;
    r.degenerate = static_cast<Index>(distinct.size()) < cfg.clusters;
    r.inertia = assign(points, centers).inertia;
    r.inertia_trace.push_back(r.inertia);
    r.centers = AnchorSet{std::move(centers)};
    return r;
  }

  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int run = 0; run < cfg.restarts; ++run) {
    Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(run)));
    KMeansResult r = lloyd(points, seed_plus_plus(points, cfg.clusters, rng), cfg);
    if (r.inertia < best.inertia) best = std::move(r);
  }
  return best;
}

FitResult fit_model(const SparseGraph& graph, const std::vector<LayerConfig>& layers,
                    const KMeansConfig& km, const EmbedOptions& options) {
  if (layers.empty()) throw std::invalid_argument("fit_model needs at least one layer");
  graph.validate();

  FitResult out;
  out.model.input_dim = graph.features.cols();
  Matrix current = graph.features;
  std::vector<Index> shared_sample;
  for (std::size_t t = 0; t < layers.size(); ++t) {
    const LayerConfig& cfg = layers[t];
    std::vector<Index> rows;
    if (km.redraw_per_layer || t == 0) {
      rows = sample_rows(current.rows(), km, derive_seed(km.seed, 2 * t));
      shared_sample = rows;
    } else {
      rows = shared_sample;
    }
    Matrix sample(static_cast<Index>(rows.size()), current.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) sample.row(static_cast<Index>(i)) = current.row(rows[i]);

    KMeansConfig layer_km = km;
    layer_km.clusters = cfg.components;
    layer_km.sample_cap = std::max(km.sample_cap, cfg.components);
    layer_km.seed = derive_seed(km.seed, 2 * t + 1);
    KMeansResult fit = kmeans_fit(sample, layer_km);
    if (fit.degenerate) {
      out.warnings.push_back("layer " + std::to_string(t + 1) +
                             ": fewer distinct rows than components; anchors were duplicated");
    }
    out.inertias.push_back(fit.inertia);

    LayerResult next = embed_layer(graph, current, cfg, fit.centers, options);
    if (!next.unconverged_nodes.empty()) {
      out.warnings.push_back("layer " + std::to_string(t + 1) + ": Sinkhorn hit its iteration cap on " +
                             std::to_string(next.unconverged_nodes.size()) + " nodes");
    }
    out.model.layers.push_back(FieLayer{cfg, std::move(fit.centers)});
    current = std::move(next.features);
  }
  return out;
}

}  // namespace fie
