#pragma once

#include "fie/graph.hpp"
#include "fie/logreg.hpp"
#include "fie/types.hpp"

#include <json.hpp>

#include <filesystem>
#include <utility>
#include <vector>

namespace fie::io {

namespace fs = std::filesystem;

/// Headerless comma-separated matrix; every row must have the same width.
Matrix read_matrix_csv(const fs::path& path);
/// Writes with 17 significant digits so values round-trip exactly.
void write_matrix_csv(const fs::path& path, const Matrix& m);

/// Two tab-separated 0-based node ids per line. Blank lines and lines
/// starting with '#' are skipped.
std::vector<std::pair<Index, Index>> read_edges(const fs::path& path);

/// Features define the node count; edges must reference existing nodes.
SparseGraph load_graph(const fs::path& edges, const fs::path& features);

/// `node_id,label` per line; nodes not listed get label -1.
std::vector<int> read_labels(const fs::path& path, Index num_nodes);
/// One node id per line.
std::vector<Index> read_index_list(const fs::path& path);
/// train.txt is required; val.txt and test.txt may be absent.
LabeledSplit read_split(const fs::path& labels, const fs::path& splits_dir, Index num_nodes);

/// model.json plus anchors_<t>.csv for every layer t (1-based).
void save_model(const fs::path& dir, const FieModel& model, const nlohmann::json& fit_info = {});
FieModel load_model(const fs::path& dir);

}  // namespace fie::io
