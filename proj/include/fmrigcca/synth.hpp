#pragma once

#include "fmrigcca/pipeline.hpp"
#include "fmrigcca/types.hpp"

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace fmrigcca::synth {

/// snr_db value meaning "no noise at all" (beta = 0).
inline constexpr double kNoiselessSnr = std::numeric_limits<double>::infinity();

struct SynthConfig {
  Index n_voxels = 20000;
  Index n_timepoints = 100;
  Index n_subjects = 25;
  Index common_rank = 30;
  double snr_db = 0.0;
  /// Structured-to-unstructured noise power ratio sum ||A S_k^T||^2 / sum ||E_k||^2.
  double c_ratio = 0.33;
  std::uint64_t seed = 0;
  int trials = 20;
  /// Keep the scaled unstructured noise E_k in the ground truth (memory heavy).
  bool keep_noise = false;
};

/// Throws ValidationError unless all counts are positive, K >= 2, R < M and c > 0.
void validate(const SynthConfig& config);

/// Components held fixed across realizations: a ~ U[0,1]^N, s ~ N(0,1)^M, lambda ~ U[0,1]^K.
struct FixedFactors {
  Vector a;
  Vector s;
  Vector lambda;
};

FixedFactors draw_fixed_factors(const SynthConfig& config, std::uint64_t seed);

/// Ground truth of X_k = lambda_k a s^T + beta (A S_k^T + E_k), with E_k ~ N(0, sigma_E^2).
struct SynthGroundTruth {
  Vector a_true;
  Vector s_true;
  Vector lambda_true;
  DenseMatrix A;                  // N x (R-1), U[0,1]
  std::vector<DenseMatrix> S;     // M x (R-1) per subject, N(0,1)
  std::vector<DenseMatrix> noise; // E_k (already scaled by sigma_E); empty unless keep_noise
  double beta = 0.0;
  double sigma_e = 0.0;
};

struct SynthDataset {
  MultiSubjectDataset data;
  SynthGroundTruth truth;
  SynthConfig config;
};

/// Draws every factor from config.seed.
SynthDataset generate(const SynthConfig& config);

/// Uses the given a, s, lambda and draws A, S_k, E_k from `realization_seed`. sigma_E and beta
/// are calibrated on the realized norms, so the noise ratio equals c_ratio and the SNR equals
/// snr_db up to rounding.
SynthDataset generate(const SynthConfig& config, const FixedFactors& fixed, std::uint64_t realization_seed);

/// sum_k ||lambda_k a s^T||_F^2 / sum_k ||X_k - lambda_k a s^T||_F^2 recomputed from the data.
double realized_snr(const SynthDataset& ds);

/// Pearson correlation. Throws ValidationError for unequal or too-short inputs and for a
/// constant input.
double correlation_coefficient(const Vector& x, const Vector& y);

struct SweepOptions {
  std::vector<double> snr_grid_db;
  int trials = 20;
  std::uint64_t seed = 0;
  double rel_tol = gcca::kDefaultRelTol;
  pipeline::AoOptions ao;
};

inline const std::vector<std::string>& sweep_metrics() {
  static const std::vector<std::string> names = {"corr_s", "corr_a_m1", "corr_a_m2", "corr_lambda_m1",
                                                 "corr_lambda_m2"};
  return names;
}

/// Absolute correlations of one trial, in sweep_metrics() order.
struct TrialRecord {
  double snr_db = 0.0;
  int trial = 0;
  std::vector<double> values;
};

struct SweepCell {
  double snr_db = 0.0;
  std::string metric;
  double mean = 0.0;
  double std = 0.0;
  int trials = 0;
};

struct SweepResult {
  std::vector<SweepCell> cells;
  std::vector<TrialRecord> records;

  /// Mean of `metric` at grid point `snr_db`; throws if absent.
  double mean(double snr_db, const std::string& metric) const;
};

/// Monte-Carlo SNR sweep: a, s, lambda are drawn once from `seed`; every (SNR point, trial)
/// redraws A, S_k, E_k from a stream derived from (seed, snr index, trial index) and runs the
/// full pipeline with both rank-one variants. The noiseless sentinel runs stage one at
/// min(R, numerical rank of the views).
SweepResult run_snr_sweep(const SynthConfig& base, const SweepOptions& options);

/// Columns snr_db,metric,mean,std,trials.
std::string sweep_csv(const SweepResult& result);
/// Long format, one row per trial and metric: snr_db,trial,metric,value.
std::string sweep_trials_csv(const SweepResult& result);

}  // namespace fmrigcca::synth
