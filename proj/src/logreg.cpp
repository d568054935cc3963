#include "fie/logreg.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

namespace fie {

namespace {

std::optional<double> accuracy(const std::vector<int>& predicted, const std::vector<int>& labels,
                               const std::vector<Index>& nodes) {
  if (nodes.empty()) return std::nullopt;
  std::size_t hits = 0;
  for (Index v : nodes) {
    const auto i = static_cast<std::size_t>(v);
    if (predicted[i] == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(nodes.size());
}

}  // namespace

void LabeledSplit::validate(Index num_nodes) const {
  if (static_cast<Index>(labels.size()) != num_nodes) {
    throw InputError("labels cover " + std::to_string(labels.size()) + " nodes, embeddings have " +
                     std::to_string(num_nodes));
  }
  std::set<Index> seen;
  for (const auto* part : {&train, &val, &test}) {
    for (Index v : *part) {
      if (v < 0 || v >= num_nodes) {
        throw InputError("split node " + std::to_string(v) + " is outside [0, " +
                         std::to_string(num_nodes) + ")");
      }
      if (!seen.insert(v).second) {
        throw InputError("node " + std::to_string(v) + " appears in more than one split entry");
      }
      if (labels[static_cast<std::size_t>(v)] < 0) {
        throw InputError("split node " + std::to_string(v) + " has no label");
      }
    }
  }
}

int LabeledSplit::num_classes() const {
  int top = -1;
  for (int y : labels) top = std::max(top, y);
  return top + 1;
}

void LogRegConfig::validate() const {
  if (!(l2 >= 0.0)) throw std::invalid_argument("l2 must be >= 0");
  if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning_rate must be >= 0");
}

double logreg_objective(const Matrix& design, const std::vector<int>& targets, const Matrix& W,
                        double l2, Matrix* grad) {
  const Index n = design.rows();
  const Index features = W.rows() - 1;
  Matrix probs = design * W;
  double loss = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double top = probs.row(i).maxCoeff();
    probs.row(i).array() = (probs.row(i).array() - top).exp();
    const double z = probs.row(i).sum();
    const int y = targets[static_cast<std::size_t>(i)];
    loss -= std::log(probs(i, y) / z);
    probs.row(i) /= z;
  }
  loss /= static_cast<double>(n);
  loss += 0.5 * l2 * W.topRows(features).squaredNorm();
  if (grad != nullptr) {
    for (Index i = 0; i < n; ++i) probs(i, targets[static_cast<std::size_t>(i)]) -= 1.0;
    *grad = design.transpose() * probs / static_cast<double>(n);
    grad->topRows(features) += l2 * W.topRows(features);
  }
  return loss;
}

LogRegModel train_logreg(const Matrix& embeddings, const LabeledSplit& split,
                         const LogRegConfig& cfg) {
  cfg.validate();
  split.validate(embeddings.rows());
  if (split.train.empty()) throw InputError("training split is empty");
  if (!embeddings.allFinite()) throw NumericalError("embeddings contain non-finite values");

  const Index n = static_cast<Index>(split.train.size());
  const Index d = embeddings.cols();
  const int classes = split.num_classes();

  Matrix train(n, d);
  std::vector<int> targets(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const Index v = split.train[static_cast<std::size_t>(i)];
    train.row(i) = embeddings.row(v);
    targets[static_cast<std::size_t>(i)] = split.labels[static_cast<std::size_t>(v)];
  }
  const RowVector mean = train.colwise().mean();
  RowVector scale = ((train.rowwise() - mean).array().square().colwise().sum() /
                     static_cast<double>(n)).sqrt();
  for (Index k = 0; k < d; ++k) {
    if (!(scale[k] > 0.0)) scale[k] = 1.0;
  }

  Matrix design(n, d + 1);
  design.leftCols(d) = ((train.rowwise() - mean).array().rowwise() / scale.array()).matrix();
  design.col(d).setOnes();

  Matrix W = Matrix::Zero(d + 1, classes);
  Matrix grad;
  double loss = logreg_objective(design, targets, W, cfg.l2, &grad);
  // Diagonal preconditioner: standardized features have unit variance, so the
  // penalty dominates the curvature of the regularized rows when l2 is large.
  const double feature_scale = 1.0 / (1.0 + cfg.l2);
  auto direction = [&](const Matrix& g) {
    Matrix dir = g;
    dir.topRows(d) *= feature_scale;
    return dir;
  };
  LogRegModel model;
  double step = 1.0;
  for (int it = 0; it < cfg.max_iters; ++it) {
    if (!std::isfinite(loss)) throw NumericalError("logistic regression loss became non-finite");
    if (grad.norm() < cfg.tol) {
      model.converged = true;
      break;
    }
    const Matrix dir = direction(grad);
    const double slope = (grad.array() * dir.array()).sum();
    Matrix candidate;
    if (cfg.learning_rate > 0.0) {
      candidate = W - cfg.learning_rate * dir;
    } else {
      // Armijo backtracking, starting from twice the last accepted step.
      step = std::min(step * 2.0, 1e6);
      for (;;) {
        candidate = W - step * dir;
        const double trial = logreg_objective(design, targets, candidate, cfg.l2, nullptr);
        if (trial <= loss - 0.5 * step * slope) break;
        step *= 0.5;
        if (step < 1e-20) break;
      }
      if (step < 1e-20) {
        model.converged = true;  // no further decrease representable
        break;
      }
    }
    W = std::move(candidate);
    loss = logreg_objective(design, targets, W, cfg.l2, &grad);
    model.loss_trace.push_back(loss);
    model.iterations = it + 1;
  }
  if (!std::isfinite(loss)) throw NumericalError("logistic regression loss became non-finite");

  // Fold the standardization into raw-space weights.
  model.weights.resize(d + 1, classes);
  for (Index k = 0; k < d; ++k) model.weights.row(k) = W.row(k) / scale[k];
  model.weights.row(d) = W.row(d);
  for (Index k = 0; k < d; ++k) model.weights.row(d) -= mean[k] * model.weights.row(k);
  return model;
}

std::vector<int> predict(const Matrix& embeddings, const Matrix& weights) {
  if (weights.rows() != embeddings.cols() + 1) {
    throw InputError("weights have " + std::to_string(weights.rows()) + " rows for " +
                     std::to_string(embeddings.cols()) + " features plus bias");
  }
  const Index d = embeddings.cols();
  Matrix logits = embeddings * weights.topRows(d);
  logits.rowwise() += weights.row(d);
  std::vector<int> out(static_cast<std::size_t>(embeddings.rows()));
  for (Index i = 0; i < logits.rows(); ++i) {
    Index best = 0;
    for (Index c = 1; c < logits.cols(); ++c) {
      if (logits(i, c) > logits(i, best)) best = c;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

Metrics evaluate(const Matrix& embeddings, const LabeledSplit& split, const Matrix& weights) {
  split.validate(embeddings.rows());
  const std::vector<int> predicted = predict(embeddings, weights);
  Metrics m;
  m.train_acc = accuracy(predicted, split.labels, split.train);
  m.val_acc = accuracy(predicted, split.labels, split.val);
  m.test_acc = accuracy(predicted, split.labels, split.test);
  const int classes = std::max(split.num_classes(), static_cast<int>(weights.cols()));
  for (int c = 0; c < classes; ++c) {
    std::vector<Index> members;
    for (Index v : split.test) {
      if (split.labels[static_cast<std::size_t>(v)] == c) members.push_back(v);
    }
    m.per_class.push_back(accuracy(predicted, split.labels, members));
  }
  return m;
}

}  // namespace fie
