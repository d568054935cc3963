#include "fie/multiset.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fie {

namespace {

void check_inputs(const SampleSet& points, const AnchorSet& anchors, const char* what) {
  if (anchors.components() < 1) {
    throw std::invalid_argument(std::string(what) + ": anchor set is empty");
  }
  if (points.size() < 1) throw std::invalid_argument(std::string(what) + ": multiset is empty");
  if (points.dim() != anchors.dim()) {
    throw std::invalid_argument(std::string(what) + ": points have dimension " +
                                std::to_string(points.dim()) + ", anchors " +
                                std::to_string(anchors.dim()));
  }
  if (!points.points.allFinite() || !anchors.means.allFinite()) {
    throw NumericalError(std::string(what) + ": non-finite input");
  }
}

double lse_row(const Matrix& m, Index i, const Vector& shift) {
  double top = -std::numeric_limits<double>::infinity();
  for (Index j = 0; j < m.cols(); ++j) top = std::max(top, m(i, j) + shift[j]);
  if (!std::isfinite(top)) return top;
  double s = 0.0;
  for (Index j = 0; j < m.cols(); ++j) s += std::exp(m(i, j) + shift[j] - top);
  return top + std::log(s);
}

double lse_col(const Matrix& m, Index j, const Vector& shift) {
  double top = -std::numeric_limits<double>::infinity();
  for (Index i = 0; i < m.rows(); ++i) top = std::max(top, m(i, j) + shift[i]);
  if (!std::isfinite(top)) return top;
  double s = 0.0;
  for (Index i = 0; i < m.rows(); ++i) s += std::exp(m(i, j) + shift[i] - top);
  return top + std::log(s);
}

/// log alpha_ij = u_i + v_j + kernel_ij
Matrix assemble_log_plan(const Matrix& kernel, const Vector& u, const Vector& v) {
  Matrix out(kernel.rows(), kernel.cols());
  for (Index i = 0; i < kernel.rows(); ++i) {
    for (Index j = 0; j < kernel.cols(); ++j) out(i, j) = u[i] + v[j] + kernel(i, j);
  }
  return out;
}

void record_violations(AssignmentMatrix& plan, double row_target, double col_target) {
  const Matrix& a = plan.alpha();
  plan.row_violation = (a.rowwise().sum().array() - row_target).abs().sum();
  plan.col_violation = (a.colwise().sum().array() - col_target).abs().sum();
}

}  // namespace

AssignmentMatrix AssignmentMatrix::from_log(Matrix log_alpha) {
  AssignmentMatrix out;
  out.alpha_ = log_alpha.array().exp().matrix();
  out.log_alpha_ = std::move(log_alpha);
  return out;
}

AssignmentMatrix AssignmentMatrix::from_weights(Matrix alpha) {
  if ((alpha.array() < 0.0).any() || !alpha.allFinite()) {
    throw std::invalid_argument("assignment weights must be finite and nonnegative");
  }
  AssignmentMatrix out;
  out.log_alpha_ = alpha.array().log().matrix();
  out.alpha_ = std::move(alpha);
  return out;
}

void EstepConfig::validate() const {
  if (!(epsilon > 0.0)) throw std::invalid_argument("epsilon must be positive");
  if (!(tau1 > 0.0)) throw std::invalid_argument("tau1 must be positive");
  if (!(tau2 > 0.0)) throw std::invalid_argument("tau2 must be positive");
  if (max_sinkhorn_iters < 1) throw std::invalid_argument("max_sinkhorn_iters must be >= 1");
  if (!(sinkhorn_tol > 0.0)) throw std::invalid_argument("sinkhorn_tol must be positive");
}

Matrix half_sq_distances(const Matrix& points, const Matrix& means) {
  Matrix cost(points.rows(), means.rows());
  for (Index i = 0; i < points.rows(); ++i) {
    for (Index j = 0; j < means.rows(); ++j) {
      cost(i, j) = 0.5 * (points.row(i) - means.row(j)).squaredNorm();
    }
  }
  return cost;
}

AssignmentMatrix e_step_softmax(const SampleSet& points, const AnchorSet& anchors) {
  check_inputs(points, anchors, "e_step_softmax");
  Matrix log_alpha = -half_sq_distances(points.points, anchors.means);
  for (Index i = 0; i < log_alpha.rows(); ++i) {
    const double top = log_alpha.row(i).maxCoeff();
    const double norm = top + std::log((log_alpha.row(i).array() - top).exp().sum());
    log_alpha.row(i).array() -= norm;
  }
  AssignmentMatrix out = AssignmentMatrix::from_log(std::move(log_alpha));
  record_violations(out, 1.0, static_cast<double>(points.size()) /
                                  static_cast<double>(anchors.components()));
  out.col_violation = 0.0;  // no column target for the unconstrained E-step
  return out;
}

AssignmentMatrix e_step_balanced_ot(const SampleSet& points, const AnchorSet& anchors,
                                    const EstepConfig& cfg) {
  check_inputs(points, anchors, "e_step_balanced_ot");
  cfg.validate();
  const Index n = points.size();
  const Index p = anchors.components();
  const double log_col_target = std::log(static_cast<double>(n) / static_cast<double>(p));
  const Matrix kernel = -half_sq_distances(points.points, anchors.means) / cfg.epsilon;

  Vector u = Vector::Zero(n);
  Vector v = Vector::Zero(p);
  bool converged = false;
  int iter = 0;
  double row_violation = 0.0;
  while (iter < cfg.max_sinkhorn_iters) {
    ++iter;
    for (Index i = 0; i < n; ++i) u[i] = -lse_row(kernel, i, v);
    for (Index j = 0; j < p; ++j) v[j] = log_col_target - lse_col(kernel, j, u);
    // Columns are exact after the v-update; rows carry the residual.
    row_violation = 0.0;
    for (Index i = 0; i < n; ++i) row_violation += std::abs(std::exp(u[i] + lse_row(kernel, i, v)) - 1.0);
    if (row_violation < cfg.sinkhorn_tol) {
      converged = true;
      break;
    }
  }

  AssignmentMatrix out = AssignmentMatrix::from_log(assemble_log_plan(kernel, u, v));
  out.converged = converged;
  out.iterations = iter;
  record_violations(out, 1.0, static_cast<double>(n) / static_cast<double>(p));
  if (!out.alpha().allFinite()) throw NumericalError("e_step_balanced_ot: non-finite plan");
  return out;
}

AssignmentMatrix e_step_unbalanced_ot(const SampleSet& points, const AnchorSet& anchors,
                                      const EstepConfig& cfg) {
  check_inputs(points, anchors, "e_step_unbalanced_ot");
  cfg.validate();
  const Index n = points.size();
  const Index p = anchors.components();
  const double log_col_target = std::log(static_cast<double>(n) / static_cast<double>(p));
  const double row_damping = std::isinf(cfg.tau1) ? 1.0 : cfg.tau1 / (cfg.tau1 + cfg.epsilon);
  const double col_damping = std::isinf(cfg.tau2) ? 1.0 : cfg.tau2 / (cfg.tau2 + cfg.epsilon);
  const Matrix kernel = -half_sq_distances(points.points, anchors.means) / cfg.epsilon;

  Vector u = Vector::Zero(n);
  Vector v = Vector::Zero(p);
  bool converged = false;
  int iter = 0;
  while (iter < cfg.max_sinkhorn_iters) {
    ++iter;
    double change = 0.0;
    // Column update first so that a hard row constraint holds exactly on exit.
    for (Index j = 0; j < p; ++j) {
      const double next = col_damping * (log_col_target - lse_col(kernel, j, u));
      change = std::max(change, std::abs(next - v[j]));
      v[j] = next;
    }
    for (Index i = 0; i < n; ++i) {
      const double next = -row_damping * lse_row(kernel, i, v);
      change = std::max(change, std::abs(next - u[i]));
      u[i] = next;
    }
    if (change < cfg.sinkhorn_tol) {
      converged = true;
      break;
    }
  }

  AssignmentMatrix out = AssignmentMatrix::from_log(assemble_log_plan(kernel, u, v));
  out.converged = converged;
  out.iterations = iter;
  record_violations(out, 1.0, static_cast<double>(n) / static_cast<double>(p));
  if (!out.alpha().allFinite()) throw NumericalError("e_step_unbalanced_ot: non-finite plan");
  return out;
}

AssignmentMatrix e_step(const SampleSet& points, const AnchorSet& anchors,
                        const EstepConfig& cfg) {
  switch (cfg.variant) {
    case EstepVariant::Softmax:
      return e_step_softmax(points, anchors);
    case EstepVariant::BalancedOT:
      return e_step_balanced_ot(points, anchors, cfg);
    case EstepVariant::UnbalancedOT:
      return e_step_unbalanced_ot(points, anchors, cfg);
  }
  throw std::invalid_argument("unknown E-step variant");
}

AnchorSet m_step(const SampleSet& points, const AssignmentMatrix& alpha,
                 const AnchorSet& fallback, double empty_mass) {
  if (alpha.rows() != points.size()) {
    throw std::invalid_argument("m_step: assignment has " + std::to_string(alpha.rows()) +
                                " rows for " + std::to_string(points.size()) + " points");
  }
  if (alpha.cols() != fallback.components() || points.dim() != fallback.dim()) {
    throw std::invalid_argument("m_step: assignment/anchor shape mismatch");
  }
  const Matrix& log_alpha = alpha.log_alpha();
  const Vector zeros = Vector::Zero(points.size());
  const double log_floor = empty_mass > 0.0 ? std::log(empty_mass)
                                            : -std::numeric_limits<double>::infinity();

  AnchorSet out{fallback.means};
  for (Index j = 0; j < alpha.cols(); ++j) {
    const double log_mass = lse_col(log_alpha, j, zeros);
    if (!std::isfinite(log_mass) || log_mass < log_floor) continue;
    RowVector mean = RowVector::Zero(points.dim());
    for (Index i = 0; i < points.size(); ++i) {
      const double w = std::exp(log_alpha(i, j) - log_mass);
      if (w != 0.0) mean += w * points.points.row(i);
    }
    out.means.row(j) = mean;
  }
  return out;
}

double mean_log_likelihood(const SampleSet& points, const AnchorSet& theta) {
  const MixtureSpec model = MixtureSpec::uniform(theta.means);
  double total = 0.0;
  for (Index i = 0; i < points.size(); ++i) {
    total += mixture_log_density(model, points.points.row(i));
  }
  return total / static_cast<double>(points.size());
}

MultisetEstimate em_estimate(const SampleSet& points, const AnchorSet& anchors, int iters,
                             const EstepConfig& cfg, double empty_mass) {
  if (iters < 0) throw std::invalid_argument("em_estimate: iters must be >= 0");
  MultisetEstimate est;
  est.theta = anchors;
  if (iters == 0) {
    est.alpha = e_step(points, anchors, cfg);
    est.converged = est.alpha.converged;
    return est;
  }
  est.loglik_trace.reserve(static_cast<std::size_t>(iters));
  for (int t = 0; t < iters; ++t) {
    est.alpha = e_step(points, est.theta, cfg);
    est.converged = est.converged && est.alpha.converged;
    // An empty component keeps its current mean, which is the anchor unless
    // it received mass in an earlier round.
    est.theta = m_step(points, est.alpha, est.theta, empty_mass);
    est.loglik_trace.push_back(mean_log_likelihood(points, est.theta));
  }
  if (!est.theta.means.allFinite()) throw NumericalError("em_estimate: non-finite estimate");
  return est;
}

Vector fie_embed_distribution(const AnchorSet& theta, const AnchorSet& anchors) {
  if (theta.components() != anchors.components() || theta.dim() != anchors.dim()) {
    throw std::invalid_argument("fie_embed_distribution: parameter shape mismatch");
  }
  const Matrix diff = theta.means - anchors.means;
  const double scale = 1.0 / std::sqrt(static_cast<double>(anchors.components()));
  return Eigen::Map<const Vector>(diff.data(), diff.size()) * scale;
}

Vector fie_embed(const SampleSet& points, const AnchorSet& anchors, int iters,
                 const EstepConfig& cfg, double empty_mass) {
  const MultisetEstimate est = em_estimate(points, anchors, iters, cfg, empty_mass);
  return fie_embed_distribution(est.theta, anchors);
}

}  // namespace fie
