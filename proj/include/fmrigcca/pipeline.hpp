#pragma once

#include "fmrigcca/gcca.hpp"
#include "fmrigcca/types.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace fmrigcca::pipeline {

/// Common temporal component: the unit vector g maximizing sum_k ||Q_k Q_k^+ g||^2, i.e. the
/// rank-one MAX-VAR solution over the stage-one loadings. weights[k] = Q_k^+ g.
struct TemporalEstimate {
  Vector g;
  std::vector<Vector> weights;
  double objective = 0.0;
  bool near_tie = false;
};

TemporalEstimate estimate_common_temporal(std::span<const DenseMatrix> loadings,
                                          double rel_tol = gcca::kDefaultRelTol);

/// X_k^o = G (G^T X_k) for each subject.
MultiSubjectDataset project_onto_subspace(const DenseMatrix& basis, const MultiSubjectDataset& data);

/// M1 fits the original data, M2 the data projected onto the common spatial subspace.
enum class Variant { m1, m2 };
const char* to_string(Variant v) noexcept;

struct AoOptions {
  int n_inits = 5;
  int max_iters = 500;
  double conv_tol = 1e-9;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  /// Keep the objective after every half-update of every attempt.
  bool record_history = false;
};

/// Everything the rank-one fit needs from the data once g is fixed:
///   sum_k ||X_k - lambda_k a g^T||_F^2 = sum_k (energy_k - 2 lambda_k a^T y_k + lambda_k^2 ||a||^2)
/// with y_k = X_k g and energy_k = ||X_k||_F^2 (||g|| = 1).
struct RankOneProblem {
  std::vector<Vector> responses;
  std::vector<double> energies;
};

RankOneProblem make_problem(const MultiSubjectDataset& data, const Vector& g);
/// Problem for the projected data G G^T X_k, built without forming the projected matrices.
RankOneProblem make_projected_problem(const DenseMatrix& basis, const MultiSubjectDataset& data, const Vector& g);

struct AttemptTrace {
  int sign = 1;  // +1 fits with g, -1 with -g
  int init = 0;
  bool collapsed = false;
  bool converged = false;
  double fit = 0.0;
  std::vector<double> history;
};

/// Nonnegative rank-one fit  min_{a >= 0, lambda >= 0} sum_k ||X_k - lambda_k a g^T||_F^2.
/// The scale ambiguity is fixed by ||a||_2 = 1; `g` is the sign of the temporal vector that
/// produced the best fit.
struct RankOneEstimate {
  Vector a;
  Vector lambda;
  Vector g;
  double fit = 0.0;
  Variant variant = Variant::m2;
  int n_inits_used = 0;
  int collapsed_attempts = 0;
  int iterations = 0;
  bool converged = false;
  std::vector<AttemptTrace> attempts;
};

/// Alternating projected least squares from n_inits random starts for each sign of g; starts
/// are drawn from streams derived from (seed, init index) so results do not depend on the
/// schedule. Throws NumericalError when every attempt collapses to a = 0.
RankOneEstimate fit_rank_one_nonneg(const RankOneProblem& problem, const Vector& g, const AoOptions& options,
                                    Variant variant = Variant::m2);

RankOneEstimate fit_rank_one_nonneg(const MultiSubjectDataset& data, const Vector& g, const AoOptions& options,
                                    Variant variant = Variant::m2);

struct PipelineOptions {
  Index rank = 1;
  double rel_tol = gcca::kDefaultRelTol;
  gcca::Route route = gcca::Route::automatic;
  Variant variant = Variant::m2;
  /// Also fit the other variant and return it in PipelineResult::alternate.
  bool fit_both = false;
  AoOptions ao;
};

struct PipelineResult {
  gcca::CommonSubspace subspace;
  TemporalEstimate temporal;
  RankOneEstimate rank_one;
  std::optional<RankOneEstimate> alternate;
  PipelineOptions options;
};

/// Stage 1: common spatial subspace. Stage 2: common temporal component from the loadings.
/// Stage 3: nonnegative rank-one fit on the projected (M2) or original (M1) data.
PipelineResult run_two_stage(const MultiSubjectDataset& data, const PipelineOptions& options);

}  // namespace fmrigcca::pipeline
