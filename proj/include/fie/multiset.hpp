#pragma once

// Fisher information embedding of a single multiset with respect to an anchor
// mixture: E-step (softmax, balanced OT, unbalanced OT), M-step, the EM loop,
// and the embedding map (1/sqrt(p)) * (theta - theta0).

#include "fie/gmm.hpp"
#include "fie/types.hpp"

#include <limits>
#include <vector>

namespace fie {

/// Anchor parameter theta0: p component means of dimension d.
struct AnchorSet {
  Matrix means;  // p x d

  Index components() const { return means.rows(); }
  Index dim() const { return means.cols(); }
};

/// n x p matrix of responsibilities / transport plan entries.
///
/// Entries are kept in the log domain as well so that the M-step can
/// normalize a column whose mass underflows in linear scale.
class AssignmentMatrix {
 public:
  AssignmentMatrix() = default;

  static AssignmentMatrix from_log(Matrix log_alpha);
  static AssignmentMatrix from_weights(Matrix alpha);

  const Matrix& alpha() const { return alpha_; }
  const Matrix& log_alpha() const { return log_alpha_; }
  Index rows() const { return alpha_.rows(); }
  Index cols() const { return alpha_.cols(); }

  /// Sinkhorn variants: false when the iteration cap was hit first.
  bool converged = true;
  int iterations = 0;
  /// L1 violation of the row / column targets at return.
  double row_violation = 0.0;
  double col_violation = 0.0;

 private:
  Matrix alpha_;
  Matrix log_alpha_;
};

enum class EstepVariant { Softmax, BalancedOT, UnbalancedOT };

struct EstepConfig {
  /// Infinite tau1 makes the row marginal a hard constraint.
  static constexpr double kHardMarginal = std::numeric_limits<double>::infinity();

  EstepVariant variant = EstepVariant::Softmax;
  double epsilon = 1.0;  // entropy weight
  double tau1 = kHardMarginal;
  double tau2 = 1.0;
  int max_sinkhorn_iters = 1000;
  double sinkhorn_tol = 1e-9;

  /// Throws std::invalid_argument on nonpositive weights or tolerances.
  void validate() const;
};

/// Columns whose total responsibility falls below this keep their anchor mean.
inline constexpr double kEmptyComponentMass = 1e-12;

struct MultisetEstimate {
  AnchorSet theta;
  AssignmentMatrix alpha;           // last E-step
  std::vector<double> loglik_trace;  // mean log-likelihood after each M-step
  bool converged = true;             // every E-step converged
};

/// Half squared distances C_ij = |x_i - w_j|^2 / 2.
Matrix half_sq_distances(const Matrix& points, const Matrix& means);

AssignmentMatrix e_step_softmax(const SampleSet& points, const AnchorSet& anchors);

/// Entropic OT with rows summing to 1 and columns to n/p, solved with
/// log-domain Sinkhorn iterations.
AssignmentMatrix e_step_balanced_ot(const SampleSet& points, const AnchorSet& anchors,
                                    const EstepConfig& cfg);

/// Entropic OT with KL-relaxed marginals (weights tau1 on rows, tau2 on
/// columns). Each potential update is damped by tau / (tau + epsilon).
AssignmentMatrix e_step_unbalanced_ot(const SampleSet& points, const AnchorSet& anchors,
                                      const EstepConfig& cfg);

/// Dispatches on cfg.variant.
AssignmentMatrix e_step(const SampleSet& points, const AnchorSet& anchors,
                        const EstepConfig& cfg);

/// Weighted means mu_j = sum_i a_ij x_i / sum_i a_ij. A component whose column
/// mass is below empty_mass (or exactly zero) keeps fallback.means.row(j).
AnchorSet m_step(const SampleSet& points, const AssignmentMatrix& alpha,
                 const AnchorSet& fallback, double empty_mass = kEmptyComponentMass);

/// Mean over points of log((1/p) sum_j N(x_i; mu_j, I)).
double mean_log_likelihood(const SampleSet& points, const AnchorSet& theta);

/// `iters` rounds of (E-step, M-step) starting from the anchors. With
/// iters == 0 theta is the anchors and alpha is one E-step at the anchors.
MultisetEstimate em_estimate(const SampleSet& points, const AnchorSet& anchors, int iters,
                             const EstepConfig& cfg, double empty_mass = kEmptyComponentMass);

/// (1/sqrt(p)) * (flatten(theta) - flatten(anchors)), row-major flatten.
Vector fie_embed_distribution(const AnchorSet& theta, const AnchorSet& anchors);

/// Embedding of a multiset: fie_embed_distribution of its EM estimate.
Vector fie_embed(const SampleSet& points, const AnchorSet& anchors, int iters,
                 const EstepConfig& cfg, double empty_mass = kEmptyComponentMass);

}  // namespace fie
