#include "fie/commands.hpp"

#include "fie/graph.hpp"
#include "fie/io.hpp"
#include "fie/kmeans.hpp"
#include "fie/logreg.hpp"
#include "fie/simulation.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <fstream>
#include <ostream>

namespace fie::cli {

namespace {

EstepVariant parse_estep(const std::string& name) {
  if (name == "softmax") return EstepVariant::Softmax;
  if (name == "ot") return EstepVariant::BalancedOT;
  if (name == "uot") return EstepVariant::UnbalancedOT;
  throw InputError("--estep must be softmax, ot or uot (got '" + name + "')");
}

std::vector<LayerConfig> layer_configs(const FitOptions& o) {
  if (o.layers < 1) throw InputError("--layers must be >= 1");
  if (o.components.size() != 1 && o.components.size() != static_cast<std::size_t>(o.layers)) {
    throw InputError("--components needs 1 or " + std::to_string(o.layers) + " values, got " +
                     std::to_string(o.components.size()));
  }
  if (o.em_iters < 0) throw InputError("--em-iters must be >= 0");
  if (o.nonlinearity != "identity" && o.nonlinearity != "relu") {
    throw InputError("--nonlinearity must be identity or relu");
  }
  std::vector<LayerConfig> layers(static_cast<std::size_t>(o.layers));
  for (std::size_t t = 0; t < layers.size(); ++t) {
    LayerConfig& c = layers[t];
    c.components = o.components.size() == 1 ? o.components[0] : o.components[t];
    if (c.components < 1) throw InputError("--components values must be >= 1");
    c.em_iters = std::max(o.em_iters, o.min_iters);
    c.estep.variant = parse_estep(o.estep);
    c.estep.epsilon = o.epsilon;
    c.estep.tau1 = o.tau1;
    c.estep.tau2 = o.tau2;
    c.include_self = o.include_self;
    c.nonlinearity = o.nonlinearity == "relu" ? Nonlinearity::ReLU : Nonlinearity::Identity;
    try {
      c.estep.validate();
    } catch (const std::invalid_argument& e) {
      throw InputError(e.what());
    }
  }
  return layers;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw InputError("cannot write " + path);
  f << text;
  if (!f) throw InputError("failed writing " + path);
}

nlohmann::json optional_value(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

void cmd_fit(const FitOptions& opts, std::ostream& log, std::ostream& warn) {
  const std::vector<LayerConfig> layers = layer_configs(opts);
  if (opts.restarts < 1) throw InputError("--restarts must be >= 1");
  if (opts.sample_cap < 1) throw InputError("--sample-cap must be >= 1");
  const SparseGraph graph = io::load_graph(opts.edges, opts.features);

  KMeansConfig km;
  km.sample_cap = opts.sample_cap;
  km.seed = opts.seed;
  km.restarts = opts.restarts;
  EmbedOptions embed;
  embed.threads = opts.threads;
  const FitResult fit = fit_model(graph, layers, km, embed);
  for (const std::string& w : fit.warnings) warn << "warning: " << w << '\n';
  for (std::size_t t = 0; t < fit.inertias.size(); ++t) {
    log << "layer " << t + 1 << " inertia " << fit.inertias[t] << '\n';
  }
  const nlohmann::json info = {{"seed", opts.seed},
                               {"sample_cap", opts.sample_cap},
                               {"restarts", opts.restarts},
                               {"inertia", fit.inertias}};
  io::save_model(opts.out, fit.model, info);
}

void cmd_embed(const EmbedCommandOptions& opts, std::ostream& log, std::ostream& warn) {
  const FieModel model = io::load_model(opts.model);
  const SparseGraph graph = io::load_graph(opts.edges, opts.features);
  EmbedOptions embed;
  embed.threads = opts.threads;
  embed.include_input_block = !opts.skip_input_block;
  const NodeEmbeddings e = embed_graph(graph, model, embed);
  if (!e.values.allFinite()) throw NumericalError("embedding produced non-finite values");
  if (!e.unconverged_nodes.empty()) {
    warn << "warning: Sinkhorn hit its iteration cap on " << e.unconverged_nodes.size()
         << " nodes\n";
  }
  io::write_matrix_csv(opts.out, e.values);
  log << "wrote " << e.values.rows() << " x " << e.values.cols() << " embeddings\n";
}

void cmd_simulate_kl(const SimulateOptions& opts, std::ostream& log) {
  const SimConfig cfg = load_sim_config(opts.config);
  const std::vector<SimRow> rows = run_simulation(cfg, opts.threads);
  for (const SimRow& r : rows) {
    if (!std::isfinite(r.sq_embed_dist_half) || !std::isfinite(r.kl_mc)) {
      throw NumericalError("simulation produced a non-finite value");
    }
  }
  write_simulation_csv(opts.out, rows);
  log << "wrote " << rows.size() << " rows for " << scenario_name(cfg.scenario) << '\n';
}

void cmd_evaluate(const EvaluateOptions& opts, std::ostream& log) {
  const Matrix x = io::read_matrix_csv(opts.embeddings);
  const LabeledSplit split = io::read_split(opts.labels, opts.splits, x.rows());
  LogRegConfig cfg;
  cfg.l2 = opts.l2;
  cfg.max_iters = opts.max_iters;
  cfg.tol = opts.tol;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  // Training is deterministic (zero init, full batch); the seed is recorded.
  const LogRegModel model = train_logreg(x, split, cfg);
  const Metrics m = evaluate(x, split, model.weights);

  nlohmann::json per_class = nlohmann::json::array();
  for (const auto& c : m.per_class) per_class.push_back(optional_value(c));
  const nlohmann::json out = {
      {"train_acc", optional_value(m.train_acc)},
      {"val_acc", optional_value(m.val_acc)},
      {"test_acc", optional_value(m.test_acc)},
      {"per_class", per_class},
      {"config",
       {{"l2", cfg.l2},
        {"tol", cfg.tol},
        {"max_iters", cfg.max_iters},
        {"seed", opts.seed},
        {"num_classes", split.num_classes()},
        {"num_features", x.cols()},
        {"iterations", model.iterations},
        {"converged", model.converged}}},
  };
  write_text(opts.out, out.dump(2) + "\n");
  if (m.test_acc) log << "test_acc " << *m.test_acc << '\n';
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Fisher information embeddings for graph nodes"};
  app.require_subcommand(1);

  FitOptions fit;
  auto* fit_cmd = app.add_subcommand("fit", "learn per-layer anchors with k-means");
  fit_cmd->add_option("--edges", fit.edges, "tab-separated edge list")->required();
  fit_cmd->add_option("--features", fit.features, "node feature CSV")->required();
  fit_cmd->add_option("--out", fit.out, "model directory")->required();
  fit_cmd->add_option("--layers", fit.layers, "number of layers")->capture_default_str();
  fit_cmd->add_option("--components", fit.components, "anchors per layer: p[,p2,...]")
      ->delimiter(',')
      ->capture_default_str();
  fit_cmd->add_option("--em-iters", fit.em_iters, "EM rounds per neighborhood")->capture_default_str();
  fit_cmd->add_option("--min-iters", fit.min_iters, "lower bound applied to --em-iters")
      ->capture_default_str();
  fit_cmd->add_option("--estep", fit.estep, "softmax|ot|uot")->capture_default_str();
  fit_cmd->add_option("--epsilon", fit.epsilon, "entropic regularization")->capture_default_str();
  fit_cmd->add_option("--tau1", fit.tau1, "row marginal relaxation (uot); default hard");
  fit_cmd->add_option("--tau2", fit.tau2, "column marginal relaxation (uot)")->capture_default_str();
  fit_cmd->add_option("--include-self", fit.include_self, "add the node to its neighborhood")
      ->capture_default_str();
  fit_cmd->add_option("--nonlinearity", fit.nonlinearity, "identity|relu")->capture_default_str();
  fit_cmd->add_option("--sample-cap", fit.sample_cap, "rows sampled for k-means")->capture_default_str();
  fit_cmd->add_option("--seed", fit.seed, "random seed")->capture_default_str();
  fit_cmd->add_option("--restarts", fit.restarts, "k-means restarts")->capture_default_str();
  fit_cmd->add_option("--threads", fit.threads, "worker threads (0: all cores)");

  EmbedCommandOptions embed;
  auto* embed_cmd = app.add_subcommand("embed", "embed every node with a fitted model");
  embed_cmd->add_option("--model", embed.model, "model directory")->required();
  embed_cmd->add_option("--edges", embed.edges, "tab-separated edge list")->required();
  embed_cmd->add_option("--features", embed.features, "node feature CSV")->required();
  embed_cmd->add_option("--out", embed.out, "output CSV")->required();
  embed_cmd->add_flag("--skip-input-block", embed.skip_input_block, "omit the raw features");
  embed_cmd->add_option("--threads", embed.threads, "worker threads (0: all cores)");

  SimulateOptions sim;
  auto* sim_cmd = app.add_subcommand("simulate-kl", "compare embedding distances with KL");
  sim_cmd->add_option("--config", sim.config, "simulation JSON config")->required();
  sim_cmd->add_option("--out", sim.out, "output CSV")->required();
  sim_cmd->add_option("--threads", sim.threads, "worker threads (0: all cores)");

  EvaluateOptions eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "logistic regression on embeddings");
  eval_cmd->add_option("--embeddings", eval.embeddings, "embedding CSV")->required();
  eval_cmd->add_option("--labels", eval.labels, "node_id,label CSV")->required();
  eval_cmd->add_option("--splits", eval.splits, "directory with train/val/test.txt")->required();
  eval_cmd->add_option("--out", eval.out, "metrics JSON")->required();
  eval_cmd->add_option("--l2", eval.l2, "L2 penalty")->capture_default_str();
  eval_cmd->add_option("--max-iters", eval.max_iters, "gradient steps")->capture_default_str();
  eval_cmd->add_option("--seed", eval.seed, "random seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*fit_cmd) cmd_fit(fit, out, err);
    if (*embed_cmd) cmd_embed(embed, out, err);
    if (*sim_cmd) cmd_simulate_kl(sim, out);
    if (*eval_cmd) cmd_evaluate(eval, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace fie::cli
