#pragma once

#include "fie/multiset.hpp"
#include "fie/types.hpp"

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace fie {

/// Undirected graph in CSR form plus a node-feature matrix. Every edge is
/// stored in both directions, neighbor lists are sorted, and there are no
/// self-loops.
struct SparseGraph {
  Index num_nodes = 0;
  std::vector<Index> offsets;  // num_nodes + 1
  std::vector<Index> targets;
  Matrix features;  // num_nodes x d0

  /// Symmetrizes, drops self-loops and deduplicates `edges`.
  static SparseGraph from_edges(Index num_nodes, const std::vector<std::pair<Index, Index>>& edges,
                                Matrix features);

  std::span<const Index> neighbors(Index node) const {
    const auto begin = static_cast<std::size_t>(offsets[static_cast<std::size_t>(node)]);
    const auto end = static_cast<std::size_t>(offsets[static_cast<std::size_t>(node) + 1]);
    return std::span<const Index>(targets).subspan(begin, end - begin);
  }

  /// Throws std::invalid_argument if the CSR structure is inconsistent.
  void validate() const;
};

enum class Nonlinearity { Identity, ReLU };

struct LayerConfig {
  Index components = 1;
  int em_iters = 1;
  EstepConfig estep;
  bool include_self = true;
  Nonlinearity nonlinearity = Nonlinearity::Identity;
};

struct FieLayer {
  LayerConfig config;
  AnchorSet anchors;

  Index output_dim() const { return anchors.components() * anchors.dim(); }
};

struct FieModel {
  Index input_dim = 0;
  std::vector<FieLayer> layers;

  /// Checks that layer t is anchored in the output space of layer t-1.
  void validate() const;
};

/// A layer's anchors do not match its input width.
class LayerMismatchError : public InputError {
 public:
  LayerMismatchError(std::size_t layer, const std::string& what)
      : InputError(what), layer_(layer) {}
  std::size_t layer() const { return layer_; }

 private:
  std::size_t layer_;
};

struct LayerResult {
  Matrix features;                      // num_nodes x (p * d)
  std::vector<Index> unconverged_nodes;  // Sinkhorn cap reached
};

/// Concatenated per-layer embeddings. Block t spans columns
/// [block_offsets[t], block_offsets[t + 1]).
struct NodeEmbeddings {
  Matrix values;
  std::vector<Index> block_offsets;
  std::vector<Index> unconverged_nodes;
};

struct EmbedOptions {
  unsigned threads = 0;  // 0: all cores
  bool include_input_block = true;
  double empty_mass = kEmptyComponentMass;
};

/// Feature rows of the neighbors of `node` (and of the node itself when
/// include_self), in increasing node order. A node without neighbors and
/// without self-inclusion yields its own row.
SampleSet neighborhood_multiset(const SparseGraph& graph, Index node, bool include_self,
                                const Matrix& layer_features);

/// One message-passing layer: row v is the (optionally rectified) embedding
/// of the neighborhood multiset of v.
LayerResult embed_layer(const SparseGraph& graph, const Matrix& layer_features,
                        const LayerConfig& cfg, const AnchorSet& anchors,
                        const EmbedOptions& options = {});

/// Runs all layers; layer t consumes the output of layer t-1 and the result
/// concatenates the raw features with every layer's output.
NodeEmbeddings embed_graph(const SparseGraph& graph, const FieModel& model,
                           const EmbedOptions& options = {});

}  // namespace fie
