#pragma once

#include "fie/types.hpp"

#include <optional>
#include <vector>

namespace fie {

struct LabeledSplit {
  std::vector<int> labels;  // per node, -1 when unlabeled
  std::vector<Index> train;
  std::vector<Index> val;
  std::vector<Index> test;

  /// Indices in range, pairwise disjoint, and labeled. Throws InputError.
  void validate(Index num_nodes) const;
  /// 1 + the largest label of any node.
  int num_classes() const;
};

struct LogRegConfig {
  /// Sentinel learning rate: use backtracking line search.
  static constexpr double kLineSearch = 0.0;

  double l2 = 1e-4;
  int max_iters = 2000;
  double tol = 1e-6;  // on the gradient norm
  double learning_rate = kLineSearch;

  void validate() const;
};

struct LogRegModel {
  /// (D + 1) x C in the raw feature space; the last row is the bias.
  Matrix weights;
  std::vector<double> loss_trace;  // loss after every accepted step
  int iterations = 0;
  bool converged = false;
};

/// Mean cross-entropy of softmax(design * W) plus (l2 / 2) * |W|^2 over all
/// rows of W except the last (bias). `design` carries a trailing ones column.
/// Writes the gradient when `grad` is non-null.
double logreg_objective(const Matrix& design, const std::vector<int>& targets, const Matrix& W,
                        double l2, Matrix* grad);

/// Full-batch (diagonally preconditioned) gradient descent on features standardized with train-split
/// statistics; the returned weights have the standardization folded in.
LogRegModel train_logreg(const Matrix& embeddings, const LabeledSplit& split,
                         const LogRegConfig& cfg);

/// Argmax of X * W[0:D] + bias, ties to the lowest class.
std::vector<int> predict(const Matrix& embeddings, const Matrix& weights);

struct Metrics {
  std::optional<double> train_acc;
  std::optional<double> val_acc;
  std::optional<double> test_acc;
  /// Test accuracy restricted to each true class (nullopt if absent).
  std::vector<std::optional<double>> per_class;
};

Metrics evaluate(const Matrix& embeddings, const LabeledSplit& split, const Matrix& weights);

}  // namespace fie
