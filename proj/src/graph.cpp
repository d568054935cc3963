#include "fie/graph.hpp"

#include "fie/parallel.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace fie {

SparseGraph SparseGraph::from_edges(Index num_nodes,
                                    const std::vector<std::pair<Index, Index>>& edges,
                                    Matrix features) {
  if (num_nodes < 0) throw std::invalid_argument("negative node count");
  if (features.rows() != num_nodes) {
    throw std::invalid_argument("feature matrix has " + std::to_string(features.rows()) +
                                " rows for " + std::to_string(num_nodes) + " nodes");
  }
  std::vector<std::pair<Index, Index>> directed;
  directed.reserve(edges.size() * 2);
  for (const auto& [a, b] : edges) {
    if (a < 0 || b < 0 || a >= num_nodes || b >= num_nodes) {
      throw std::invalid_argument("edge (" + std::to_string(a) + ", " + std::to_string(b) +
                                  ") references a node outside [0, " + std::to_string(num_nodes) +
                                  ")");
    }
    if (a == b) continue;
    directed.emplace_back(a, b);
    directed.emplace_back(b, a);
  }
  std::sort(directed.begin(), directed.end());
  directed.erase(std::unique(directed.begin(), directed.end()), directed.end());

  SparseGraph g;
  g.num_nodes = num_nodes;
  g.offsets.assign(static_cast<std::size_t>(num_nodes) + 1, 0);
  g.targets.reserve(directed.size());
  for (const auto& [a, b] : directed) {
    ++g.offsets[static_cast<std::size_t>(a) + 1];
    g.targets.push_back(b);
  }
  for (std::size_t v = 0; v < static_cast<std::size_t>(num_nodes); ++v) {
    g.offsets[v + 1] += g.offsets[v];
  }
  g.features = std::move(features);
  return g;
}

void SparseGraph::validate() const {
  if (offsets.size() != static_cast<std::size_t>(num_nodes) + 1 || offsets.front() != 0 ||
      offsets.back() != static_cast<Index>(targets.size())) {
    throw std::invalid_argument("CSR offsets do not match the node/edge counts");
  }
  for (std::size_t v = 0; v < static_cast<std::size_t>(num_nodes); ++v) {
    if (offsets[v + 1] < offsets[v]) throw std::invalid_argument("CSR offsets must be non-decreasing");
    for (Index t : neighbors(static_cast<Index>(v))) {
      if (t < 0 || t >= num_nodes) throw std::invalid_argument("CSR target out of range");
      if (t == static_cast<Index>(v)) throw std::invalid_argument("CSR stores a self-loop");
    }
  }
  if (features.rows() != num_nodes) throw std::invalid_argument("feature rows != num_nodes");
  if (!features.allFinite()) throw std::invalid_argument("features must be finite");
}

void FieModel::validate() const {
  Index width = input_dim;
  for (std::size_t t = 0; t < layers.size(); ++t) {
    const FieLayer& layer = layers[t];
    if (layer.config.components < 1 || layer.anchors.components() != layer.config.components) {
      throw LayerMismatchError(t + 1, "layer " + std::to_string(t + 1) + ": expected " +
                                          std::to_string(layer.config.components) +
                                          " anchors, found " +
                                          std::to_string(layer.anchors.components()));
    }
    if (layer.anchors.dim() != width) {
      throw LayerMismatchError(t + 1, "layer " + std::to_string(t + 1) + ": anchors have dimension " +
                                          std::to_string(layer.anchors.dim()) +
                                          " but the layer input has width " + std::to_string(width));
    }
    width = layer.output_dim();
  }
}

SampleSet neighborhood_multiset(const SparseGraph& graph, Index node, bool include_self,
                                const Matrix& layer_features) {
  if (node < 0 || node >= graph.num_nodes) {
    throw std::out_of_range("node " + std::to_string(node) + " outside [0, " +
                            std::to_string(graph.num_nodes) + ")");
  }
  const auto nbrs = graph.neighbors(node);
  SampleSet out;
  if (nbrs.empty() && !include_self) {
    out.points = layer_features.row(node);
    return out;
  }
  out.points.resize(static_cast<Index>(nbrs.size()) + (include_self ? 1 : 0), layer_features.cols());
  Index row = 0;
  bool self_pending = include_self;
  for (Index t : nbrs) {
    if (self_pending && node < t) {
      out.points.row(row++) = layer_features.row(node);
      self_pending = false;
    }
    out.points.row(row++) = layer_features.row(t);
  }
  if (self_pending) out.points.row(row++) = layer_features.row(node);
  return out;
}

LayerResult embed_layer(const SparseGraph& graph, const Matrix& layer_features,
                        const LayerConfig& cfg, const AnchorSet& anchors,
                        const EmbedOptions& options) {
  if (layer_features.rows() != graph.num_nodes) {
    throw std::invalid_argument("embed_layer: feature rows do not match the node count");
  }
  if (anchors.dim() != layer_features.cols()) {
    throw std::invalid_argument("embed_layer: anchors have dimension " +
                                std::to_string(anchors.dim()) + ", features " +
                                std::to_string(layer_features.cols()));
  }
  cfg.estep.validate();

  const Index width = anchors.components() * anchors.dim();
  LayerResult out;
  out.features.resize(graph.num_nodes, width);
  std::vector<char> converged(static_cast<std::size_t>(graph.num_nodes), 1);

  parallel_for(static_cast<std::size_t>(graph.num_nodes), options.threads, [&](std::size_t v) {
    const Index node = static_cast<Index>(v);
    const SampleSet multiset = neighborhood_multiset(graph, node, cfg.include_self, layer_features);
    const MultisetEstimate est =
        em_estimate(multiset, anchors, cfg.em_iters, cfg.estep, options.empty_mass);
    Vector row = fie_embed_distribution(est.theta, anchors);
    if (cfg.nonlinearity == Nonlinearity::ReLU) row = row.cwiseMax(0.0);
    out.features.row(node) = row.transpose();
    converged[v] = est.converged ? 1 : 0;
  });

  for (std::size_t v = 0; v < converged.size(); ++v) {
    if (!converged[v]) out.unconverged_nodes.push_back(static_cast<Index>(v));
  }
  return out;
}

NodeEmbeddings embed_graph(const SparseGraph& graph, const FieModel& model,
                           const EmbedOptions& options) {
  if (graph.features.cols() != model.input_dim) {
    throw LayerMismatchError(0, "graph features have width " +
                                    std::to_string(graph.features.cols()) +
                                    " but the model expects " + std::to_string(model.input_dim));
  }
  model.validate();

  std::vector<Matrix> blocks;
  NodeEmbeddings out;
  if (options.include_input_block) blocks.push_back(graph.features);
  Matrix current = graph.features;
  for (const FieLayer& layer : model.layers) {
    LayerResult r = embed_layer(graph, current, layer.config, layer.anchors, options);
    out.unconverged_nodes.insert(out.unconverged_nodes.end(), r.unconverged_nodes.begin(),
                                 r.unconverged_nodes.end());
    current = std::move(r.features);
    blocks.push_back(current);
  }

  Index total = 0;
  out.block_offsets.push_back(0);
  for (const Matrix& b : blocks) {
    total += b.cols();
    out.block_offsets.push_back(total);
  }
  out.values.resize(graph.num_nodes, total);
  for (std::size_t t = 0; t < blocks.size(); ++t) {
    out.values.middleCols(out.block_offsets[t], blocks[t].cols()) = blocks[t];
  }
  std::sort(out.unconverged_nodes.begin(), out.unconverged_nodes.end());
  out.unconverged_nodes.erase(std::unique(out.unconverged_nodes.begin(), out.unconverged_nodes.end()),
                              out.unconverged_nodes.end());
  return out;
}

}  // namespace fie
