#include "fie/simulation.hpp"

#include "fie/kmeans.hpp"
#include "fie/multiset.hpp"
#include "fie/parallel.hpp"
#include "fie/random.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>

namespace fie {

namespace {

constexpr Scenario kScenarios[] = {Scenario::VaryComponents, Scenario::VaryMeanDistance,
                                   Scenario::VarySpread,     Scenario::VaryFamilySize,
                                   Scenario::VaryEmIters,    Scenario::ExactSingleGaussian};

// Three unit-spaced components stacked along y at x = x0.
Matrix column_of_three(double x0, double spacing) {
  Matrix m(3, 2);
  m << x0, -spacing, x0, 0.0, x0, spacing;
  return m;
}

bool is_count(double v) { return v >= 1.0 && v == std::floor(v) && v <= 1e6; }

}  // namespace

const char* scenario_name(Scenario s) {
  switch (s) {
    case Scenario::VaryComponents: return "VaryComponents";
    case Scenario::VaryMeanDistance: return "VaryMeanDistance";
    case Scenario::VarySpread: return "VarySpread";
    case Scenario::VaryFamilySize: return "VaryFamilySize";
    case Scenario::VaryEmIters: return "VaryEmIters";
    case Scenario::ExactSingleGaussian: return "ExactSingleGaussian";
  }
  return "?";
}

std::vector<double> SimConfig::effective_grid() const {
  if (!grid.empty()) return grid;
  switch (scenario) {
    case Scenario::VaryComponents: return {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    case Scenario::VaryMeanDistance: return {1, 2, 5, 10, 20, 50, 100};
    case Scenario::VarySpread: return {0.1, 0.2, 0.5, 1, 2, 5, 10};
    case Scenario::VaryFamilySize: return {1, 2, 5, 10, 20, 50, 100};
    case Scenario::VaryEmIters: return {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    case Scenario::ExactSingleGaussian: return {0.5, 1, 2, 5, 10};
  }
  return {};
}

void SimConfig::validate() const {
  if (family_components < 1) throw InputError("family_components must be >= 1");
  if (em_iters < 0) throw InputError("em_iters must be >= 0");
  if (samples_per_dist < 1) throw InputError("samples_per_dist must be >= 1");
  if (trials < 1) throw InputError("trials must be >= 1");
  if (mc_samples < 1000) throw InputError("mc_samples must be >= 1000");
  if (dim < 1) throw InputError("dim must be >= 1");
  for (double v : effective_grid()) {
    if (!std::isfinite(v)) throw InputError("grid values must be finite");
    switch (scenario) {
      case Scenario::VaryComponents:
      case Scenario::VaryFamilySize:
        if (!is_count(v)) throw InputError("grid values must be positive integers");
        break;
      case Scenario::VaryEmIters:
        if (v < 0 || v != std::floor(v) || v > 1e6) {
          throw InputError("grid values must be non-negative integers");
        }
        break;
      case Scenario::VarySpread:
        if (!(v > 0)) throw InputError("grid values must be positive");
        break;
      case Scenario::VaryMeanDistance:
      case Scenario::ExactSingleGaussian:
        if (!(v != 0)) throw InputError("grid values must be non-zero distances");
        break;
    }
  }
}

SimConfig parse_sim_config(const nlohmann::json& j) {
  if (!j.is_object()) throw InputError("simulation config must be a JSON object");
  static const std::set<std::string> known = {
      "scenario", "grid",   "family_components", "em_iters",    "samples_per_dist",
      "trials",   "seed",   "mc_samples",        "anchor_init", "dim"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw InputError("unknown config key '" + key + "'");
  }
  SimConfig cfg;
  try {
    const std::string name = j.at("scenario").get<std::string>();
    bool found = false;
    for (Scenario s : kScenarios) {
      if (name == scenario_name(s)) {
        cfg.scenario = s;
        found = true;
      }
    }
    if (!found) throw InputError("unknown scenario '" + name + "'");
    auto count = [&](const char* key, auto& field) {
      if (!j.contains(key)) return;
      if (!j[key].is_number_integer()) throw InputError(std::string(key) + " must be an integer");
      field = j[key].get<std::remove_reference_t<decltype(field)>>();
    };
    count("family_components", cfg.family_components);
    count("em_iters", cfg.em_iters);
    count("samples_per_dist", cfg.samples_per_dist);
    count("trials", cfg.trials);
    count("mc_samples", cfg.mc_samples);
    count("dim", cfg.dim);
    if (j.contains("seed")) {
      if (!j["seed"].is_number_unsigned()) throw InputError("seed must be a non-negative integer");
      cfg.seed = j["seed"].get<std::uint64_t>();
    }
    if (j.contains("grid")) {
      if (!j["grid"].is_array() || j["grid"].empty()) throw InputError("grid must be a non-empty array");
      for (const auto& v : j["grid"]) {
        if (!v.is_number()) throw InputError("grid entries must be numbers");
        cfg.grid.push_back(v.get<double>());
      }
    }
    if (j.contains("anchor_init")) {
      const std::string init = j["anchor_init"].get<std::string>();
      if (init == "kmeans") {
        cfg.anchor_init = AnchorInit::KMeans;
      } else if (init == "standard_normal") {
        cfg.anchor_init = AnchorInit::StandardNormal;
      } else {
        throw InputError("anchor_init must be 'kmeans' or 'standard_normal'");
      }
    }
  } catch (const nlohmann::json::exception& err) {
    throw InputError(std::string("simulation config: ") + err.what());
  }
  cfg.validate();
  return cfg;
}

SimConfig load_sim_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& err) {
    throw InputError(path.string() + ": " + err.what());
  }
  return parse_sim_config(j);
}

std::pair<MixtureSpec, MixtureSpec> scenario_distributions(Scenario s, double value, Index dim) {
  switch (s) {
    case Scenario::VaryComponents: {
      const auto kappa = static_cast<Index>(value);
      Matrix b(kappa, 2);
      for (Index j = 0; j < kappa; ++j) {
        // A single component sits at the midpoint of the segment.
        const double y = kappa == 1 ? 0.0 : -2.0 + 4.0 * static_cast<double>(j) /
                                                       static_cast<double>(kappa - 1);
        b.row(j) << 5.0, y;
      }
      return {MixtureSpec::uniform(column_of_three(-5.0, 2.0)), MixtureSpec::uniform(b)};
    }
    case Scenario::VaryMeanDistance:
      return {MixtureSpec::uniform(column_of_three(-5.0, 2.0)),
              MixtureSpec::uniform(column_of_three(-5.0 + value, 2.0))};
    case Scenario::VarySpread:
      return {MixtureSpec::uniform(column_of_three(-5.0, value)),
              MixtureSpec::uniform(column_of_three(5.0, value))};
    case Scenario::VaryFamilySize:
    case Scenario::VaryEmIters:
      return {MixtureSpec::uniform(column_of_three(-5.0, 2.0)),
              MixtureSpec::uniform(column_of_three(5.0, 2.0))};
    case Scenario::ExactSingleGaussian: {
      Matrix b = Matrix::Zero(1, dim);
      b(0, 0) = value;
      return {MixtureSpec::uniform(Matrix::Zero(1, dim)), MixtureSpec::uniform(b)};
    }
  }
  throw std::invalid_argument("unknown scenario");
}

std::vector<SimRow> run_simulation(const SimConfig& cfg, unsigned threads) {
  cfg.validate();
  const std::vector<double> grid = cfg.effective_grid();
  const std::size_t trials = static_cast<std::size_t>(cfg.trials);
  std::vector<SimRow> rows(grid.size() * trials);

  parallel_for(rows.size(), threads, [&](std::size_t cell) {
    const double value = grid[cell / trials];
    const auto trial = static_cast<std::uint64_t>(cell % trials);
    const std::uint64_t trial_seed = derive_seed(cfg.seed, trial);
    const auto [f, g] = scenario_distributions(cfg.scenario, value, cfg.dim);

    SimRow& row = rows[cell];
    row.scenario_value = value;
    row.trial = static_cast<int>(trial);
    const KlApproximation kl = kl_matching_approx(f, g);
    row.kl_matching = kl.value;
    const MonteCarloEstimate mc = kl_monte_carlo(f, g, cfg.mc_samples, derive_seed(trial_seed, 3), 1);
    row.kl_mc = mc.estimate;
    row.kl_mc_stderr = mc.std_error;

    Vector delta;
    if (cfg.scenario == Scenario::ExactSingleGaussian) {
      const AnchorSet origin{Matrix::Zero(1, cfg.dim)};
      delta = fie_embed_distribution(AnchorSet{f.means}, origin) -
              fie_embed_distribution(AnchorSet{g.means}, origin);
    } else {
      const Index k = cfg.scenario == Scenario::VaryFamilySize ? static_cast<Index>(value)
                                                               : cfg.family_components;
      const int iters =
          cfg.scenario == Scenario::VaryEmIters ? static_cast<int>(value) : cfg.em_iters;
      const SampleSet xa = sample_mixture(f, cfg.samples_per_dist, derive_seed(trial_seed, 0));
      const SampleSet xb = sample_mixture(g, cfg.samples_per_dist, derive_seed(trial_seed, 1));

      AnchorSet anchors;
      if (cfg.anchor_init == AnchorInit::KMeans) {
        Matrix pooled(xa.size() + xb.size(), 2);
        pooled << xa.points, xb.points;
        KMeansConfig km;
        km.clusters = k;
        km.seed = derive_seed(trial_seed, 2);
        km.sample_cap = pooled.rows();
        anchors = kmeans_fit(pooled, km).centers;
      } else {
        Rng rng(derive_seed(trial_seed, 2));
        anchors.means.resize(k, 2);
        for (Index j = 0; j < k; ++j) anchors.means.row(j) << rng.normal(), rng.normal();
      }
      // Exact log-domain EM: only columns with zero mass keep their mean.
      const EstepConfig softmax;
      delta = fie_embed(xa, anchors, iters, softmax, 0.0) -
              fie_embed(xb, anchors, iters, softmax, 0.0);
    }
    row.sq_embed_dist_half = 0.5 * delta.squaredNorm();
    row.ratio = kl.value > 0.0 ? row.sq_embed_dist_half / kl.value
                               : std::numeric_limits<double>::quiet_NaN();
  });
  return rows;
}

void write_simulation_csv(const std::filesystem::path& path, const std::vector<SimRow>& rows) {
  std::FILE* out = std::fopen(path.string().c_str(), "wb");
  if (out == nullptr) throw InputError("cannot write " + path.string());
  std::fputs("scenario_value,trial,kl_matching,kl_mc,kl_mc_stderr,sq_embed_dist_half,ratio\n", out);
  for (const SimRow& r : rows) {
    std::fprintf(out, "%.17g,%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.scenario_value, r.trial,
                 r.kl_matching, r.kl_mc, r.kl_mc_stderr, r.sq_embed_dist_half, r.ratio);
  }
  if (std::fclose(out) != 0) throw InputError("failed writing " + path.string());
}

}  // namespace fie
