#pragma once

#include "fie/types.hpp"

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

namespace fie::cli {

struct FitOptions {
  std::string edges;
  std::string features;
  std::string out;
  int layers = 1;
  std::vector<Index> components{8};  // one entry per layer, or one for all
  int em_iters = 1;
  int min_iters = 0;  // em_iters is raised to at least this
  std::string estep = "softmax";
  double epsilon = 1.0;
  double tau1 = std::numeric_limits<double>::infinity();
  double tau2 = 1.0;
  bool include_self = true;
  std::string nonlinearity = "identity";
  Index sample_cap = 300000;
  std::uint64_t seed = 0;
  int restarts = 3;
  unsigned threads = 0;
};

struct EmbedCommandOptions {
  std::string model;
  std::string edges;
  std::string features;
  std::string out;
  bool skip_input_block = false;
  unsigned threads = 0;
};

struct SimulateOptions {
  std::string config;
  std::string out;
  unsigned threads = 0;
};

struct EvaluateOptions {
  std::string embeddings;
  std::string labels;
  std::string splits;
  std::string out;
  double l2 = 1e-4;
  int max_iters = 2000;
  double tol = 1e-6;
  std::uint64_t seed = 0;
};

// Each command writes its files and reports progress on `log`, warnings on
// `warn`. Failures surface as InputError / NumericalError.
void cmd_fit(const FitOptions& opts, std::ostream& log, std::ostream& warn);
void cmd_embed(const EmbedCommandOptions& opts, std::ostream& log, std::ostream& warn);
void cmd_simulate_kl(const SimulateOptions& opts, std::ostream& log);
void cmd_evaluate(const EvaluateOptions& opts, std::ostream& log);

/// Parses argv and dispatches. Returns the process exit code: 0 on success,
/// 2 for input errors, 3 for numerical failures.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fie::cli
