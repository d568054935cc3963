#pragma once

#include "fie/gmm.hpp"
#include "fie/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fie {

enum class Scenario {
  VaryComponents,       // p2 has kappa components spread along x = 5
  VaryMeanDistance,     // p2 is p1 shifted by d along x
  VarySpread,           // both mixtures have component spacing d in y
  VaryFamilySize,       // fixed data, vary the number of anchors k
  VaryEmIters,          // fixed data, vary the number of EM rounds M
  ExactSingleGaussian,  // p = 1, exact means at distance d, no sampling
};

enum class AnchorInit { KMeans, StandardNormal };

struct SimConfig {
  Scenario scenario = Scenario::VaryEmIters;
  std::vector<double> grid;  // empty: the scenario's default grid
  Index family_components = 10;
  int em_iters = 10;
  Index samples_per_dist = 5000;
  int trials = 10;
  std::uint64_t seed = 0;
  Index mc_samples = 20000;
  AnchorInit anchor_init = AnchorInit::KMeans;
  Index dim = 2;  // ExactSingleGaussian only

  /// Throws InputError on non-positive counts or an invalid grid.
  void validate() const;
  std::vector<double> effective_grid() const;
};

/// Strict parse: unknown keys and wrong types are InputErrors.
SimConfig parse_sim_config(const nlohmann::json& j);
SimConfig load_sim_config(const std::filesystem::path& path);

const char* scenario_name(Scenario s);

struct SimRow {
  double scenario_value = 0.0;
  int trial = 0;
  double kl_matching = 0.0;
  double kl_mc = 0.0;
  double kl_mc_stderr = 0.0;
  double sq_embed_dist_half = 0.0;
  double ratio = 0.0;  // sq_embed_dist_half / kl_matching
};

/// The two data distributions for one grid value.
std::pair<MixtureSpec, MixtureSpec> scenario_distributions(Scenario s, double value, Index dim = 2);

/// One row per (grid value, trial), grid-major. Trial t draws from the same
/// random streams at every grid value. Output does not depend on `threads`.
std::vector<SimRow> run_simulation(const SimConfig& cfg, unsigned threads = 0);

void write_simulation_csv(const std::filesystem::path& path, const std::vector<SimRow>& rows);

}  // namespace fie
