#include "fie/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <string_view>

namespace fie::io {

namespace {

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return in;
}

[[noreturn]] void parse_error(const fs::path& path, std::size_t line, const std::string& what) {
  throw InputError(path.string() + ":" + std::to_string(line) + ": " + what);
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool skippable(std::string_view line) { return line.empty() || line.front() == '#'; }

template <typename T>
bool parse_number(std::string_view text, T& out) {
  text = trim(text);
  if (text.empty()) return false;
  if constexpr (std::is_floating_point_v<T>) {
    if (text.front() == '+') text.remove_prefix(1);
  }
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && end == text.data() + text.size();
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(sep, start);
    fields.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

const char* variant_name(EstepVariant v) {
  switch (v) {
    case EstepVariant::Softmax: return "softmax";
    case EstepVariant::BalancedOT: return "ot";
    case EstepVariant::UnbalancedOT: return "uot";
  }
  return "softmax";
}

EstepVariant parse_variant(const std::string& name) {
  if (name == "softmax") return EstepVariant::Softmax;
  if (name == "ot") return EstepVariant::BalancedOT;
  if (name == "uot") return EstepVariant::UnbalancedOT;
  throw InputError("unknown E-step variant '" + name + "'");
}

}  // namespace

Matrix read_matrix_csv(const fs::path& path) {
  std::ifstream in = open_input(path);
  std::vector<double> values;
  Index cols = -1;
  Index rows = 0;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    const std::string_view body = trim(line);
    if (skippable(body)) continue;
    const auto fields = split(body, ',');
    if (cols < 0) cols = static_cast<Index>(fields.size());
    if (static_cast<Index>(fields.size()) != cols) {
      parse_error(path, lineno, "expected " + std::to_string(cols) + " columns, found " +
                                    std::to_string(fields.size()));
    }
    for (std::string_view f : fields) {
      double v = 0.0;
      if (!parse_number(f, v)) parse_error(path, lineno, "not a number: '" + std::string(trim(f)) + "'");
      if (!std::isfinite(v)) parse_error(path, lineno, "non-finite value");
      values.push_back(v);
    }
    ++rows;
  }
  if (rows == 0) throw InputError(path.string() + ": no data rows");
  Matrix m(rows, cols);
  std::copy(values.begin(), values.end(), m.data());
  return m;
}

void write_matrix_csv(const fs::path& path, const Matrix& m) {
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  if (f == nullptr) throw InputError("cannot write " + path.string());
  char buf[32];
  std::string line;
  for (Index i = 0; i < m.rows(); ++i) {
    line.clear();
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) line.push_back(',');
      const double v = m(i, j) == 0.0 ? 0.0 : m(i, j);  // no "-0"
      std::snprintf(buf, sizeof buf, "%.17g", v);
      line += buf;
    }
    line.push_back('\n');
    std::fwrite(line.data(), 1, line.size(), f);
  }
  if (std::fclose(f) != 0) throw InputError("failed writing " + path.string());
}

std::vector<std::pair<Index, Index>> read_edges(const fs::path& path) {
  std::ifstream in = open_input(path);
  std::vector<std::pair<Index, Index>> edges;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    const std::string_view body = trim(line);
    if (skippable(body)) continue;
    const auto fields = split(body, '\t');
    Index a = 0;
    Index b = 0;
    if (fields.size() != 2 || !parse_number(fields[0], a) || !parse_number(fields[1], b)) {
      parse_error(path, lineno, "expected two tab-separated node ids");
    }
    if (a < 0 || b < 0) parse_error(path, lineno, "negative node id");
    edges.emplace_back(a, b);
  }
  return edges;
}

SparseGraph load_graph(const fs::path& edges_path, const fs::path& features_path) {
  Matrix features = read_matrix_csv(features_path);
  const auto edges = read_edges(edges_path);
  const Index n = features.rows();
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (edges[i].first >= n || edges[i].second >= n) {
      throw InputError(edges_path.string() + ": edge " + std::to_string(edges[i].first) + "\t" +
                       std::to_string(edges[i].second) + " references a node >= " +
                       std::to_string(n) + " (the feature row count)");
    }
  }
  return SparseGraph::from_edges(n, edges, std::move(features));
}

std::vector<int> read_labels(const fs::path& path, Index num_nodes) {
  std::ifstream in = open_input(path);
  std::vector<int> labels(static_cast<std::size_t>(num_nodes), -1);
  std::vector<char> seen(static_cast<std::size_t>(num_nodes), 0);
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    const std::string_view body = trim(line);
    if (skippable(body)) continue;
    const auto fields = split(body, ',');
    Index node = 0;
    int label = 0;
    if (fields.size() != 2 || !parse_number(fields[0], node) || !parse_number(fields[1], label)) {
      parse_error(path, lineno, "expected node_id,label");
    }
    if (node < 0 || node >= num_nodes) {
      parse_error(path, lineno, "node " + std::to_string(node) + " outside [0, " +
                                    std::to_string(num_nodes) + ")");
    }
    if (label < 0) parse_error(path, lineno, "labels must be >= 0");
    auto& flag = seen[static_cast<std::size_t>(node)];
    if (flag) parse_error(path, lineno, "node " + std::to_string(node) + " labeled twice");
    flag = 1;
    labels[static_cast<std::size_t>(node)] = label;
  }
  return labels;
}

std::vector<Index> read_index_list(const fs::path& path) {
  std::ifstream in = open_input(path);
  std::vector<Index> ids;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    const std::string_view body = trim(line);
    if (skippable(body)) continue;
    Index v = 0;
    if (!parse_number(body, v)) parse_error(path, lineno, "expected a node id");
    ids.push_back(v);
  }
  return ids;
}

LabeledSplit read_split(const fs::path& labels, const fs::path& splits_dir, Index num_nodes) {
  LabeledSplit split;
  split.labels = read_labels(labels, num_nodes);
  split.train = read_index_list(splits_dir / "train.txt");
  if (fs::exists(splits_dir / "val.txt")) split.val = read_index_list(splits_dir / "val.txt");
  if (fs::exists(splits_dir / "test.txt")) split.test = read_index_list(splits_dir / "test.txt");
  split.validate(num_nodes);
  return split;
}

void save_model(const fs::path& dir, const FieModel& model, const nlohmann::json& fit_info) {
  model.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create " + dir.string() + ": " + ec.message());

  nlohmann::json j;
  j["format"] = "fie-model";
  j["version"] = 1;
  j["input_dim"] = model.input_dim;
  j["layers"] = nlohmann::json::array();
  for (std::size_t t = 0; t < model.layers.size(); ++t) {
    const FieLayer& layer = model.layers[t];
    const EstepConfig& e = layer.config.estep;
    const std::string file = "anchors_" + std::to_string(t + 1) + ".csv";
    write_matrix_csv(dir / file, layer.anchors.means);
    nlohmann::json estep = {{"variant", variant_name(e.variant)},
                            {"epsilon", e.epsilon},
                            {"tau2", e.tau2},
                            {"max_sinkhorn_iters", e.max_sinkhorn_iters},
                            {"sinkhorn_tol", e.sinkhorn_tol}};
    estep["tau1"] = std::isinf(e.tau1) ? nlohmann::json(nullptr) : nlohmann::json(e.tau1);
    j["layers"].push_back({
        {"components", layer.config.components},
        {"em_iters", layer.config.em_iters},
        {"include_self", layer.config.include_self},
        {"nonlinearity", layer.config.nonlinearity == Nonlinearity::ReLU ? "relu" : "identity"},
        {"estep", estep},
        {"anchors", file},
    });
  }
  if (!fit_info.is_null()) j["fit"] = fit_info;

  const fs::path out = dir / "model.json";
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  if (!f) throw InputError("cannot write " + out.string());
  f << j.dump(2) << '\n';
}

FieModel load_model(const fs::path& dir) {
  const fs::path path = dir / "model.json";
  std::ifstream in = open_input(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& err) {
    throw InputError(path.string() + ": " + err.what());
  }
  FieModel model;
  try {
    model.input_dim = j.at("input_dim").get<Index>();
    const auto& layers = j.at("layers");
    for (std::size_t t = 0; t < layers.size(); ++t) {
      const auto& l = layers[t];
      FieLayer layer;
      layer.config.components = l.at("components").get<Index>();
      layer.config.em_iters = l.at("em_iters").get<int>();
      layer.config.include_self = l.at("include_self").get<bool>();
      const auto nl = l.at("nonlinearity").get<std::string>();
      if (nl != "identity" && nl != "relu") throw InputError("unknown nonlinearity '" + nl + "'");
      layer.config.nonlinearity = nl == "relu" ? Nonlinearity::ReLU : Nonlinearity::Identity;
      const auto& e = l.at("estep");
      layer.config.estep.variant = parse_variant(e.at("variant").get<std::string>());
      layer.config.estep.epsilon = e.at("epsilon").get<double>();
      layer.config.estep.tau1 =
          e.at("tau1").is_null() ? EstepConfig::kHardMarginal : e.at("tau1").get<double>();
      layer.config.estep.tau2 = e.at("tau2").get<double>();
      layer.config.estep.max_sinkhorn_iters = e.at("max_sinkhorn_iters").get<int>();
      layer.config.estep.sinkhorn_tol = e.at("sinkhorn_tol").get<double>();
      layer.anchors.means = read_matrix_csv(dir / l.at("anchors").get<std::string>());
      model.layers.push_back(std::move(layer));
    }
  } catch (const nlohmann::json::exception& err) {
    throw InputError(path.string() + ": " + err.what());
  }
  for (const auto& layer : model.layers) {
    try {
      layer.config.estep.validate();
    } catch (const std::invalid_argument& err) {
      throw InputError(path.string() + ": " + err.what());
    }
  }
  return model;
}

}  // namespace fie::io
