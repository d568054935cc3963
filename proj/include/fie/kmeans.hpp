#pragma once

#include "fie/graph.hpp"
#include "fie/multiset.hpp"
#include "fie/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fie {

struct KMeansConfig {
  Index clusters = 1;
  int max_iters = 100;
  double tol = 1e-6;  // stop when the relative inertia decrease falls below this
  Index sample_cap = 300000;
  std::uint64_t seed = 0;
  int restarts = 3;
  // Node sampling for fit_model when a layer has more rows than sample_cap.
  bool sample_with_replacement = false;
  bool redraw_per_layer = true;

  void validate() const;
};

struct KMeansResult {
  AnchorSet centers;
  double inertia = 0.0;
  /// Inertia after every assignment step of the winning restart.
  std::vector<double> inertia_trace;
  /// Fewer distinct rows than clusters: centers were padded by duplication.
  bool degenerate = false;
};

/// k-means++ seeding followed by Lloyd iterations, best of cfg.restarts runs.
/// Distance ties go to the lowest center index; a cluster that loses all its
/// points is re-seeded at the point farthest from its previous center.
KMeansResult kmeans_fit(const Matrix& points, const KMeansConfig& cfg);

struct FitResult {
  FieModel model;
  std::vector<double> inertias;  // per layer
  std::vector<std::string> warnings;
};

/// Greedy layer-by-layer fitting: sample rows of the current layer input,
/// cluster them into that layer's anchors, then embed to get the next input.
/// km.clusters is ignored in favor of each layer's component count.
FitResult fit_model(const SparseGraph& graph, const std::vector<LayerConfig>& layers,
                    const KMeansConfig& km, const EmbedOptions& options = {});

}  // namespace fie
