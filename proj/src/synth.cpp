#include "fmrigcca/synth.hpp"

#include "fmrigcca/error.hpp"
#include "fmrigcca/linalg.hpp"
#include "fmrigcca/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <string>

namespace fmrigcca::synth {

namespace {

constexpr std::uint64_t kStreamA = 0;
constexpr std::uint64_t kStreamS = 1;
constexpr std::uint64_t kStreamE = 2;
constexpr std::uint64_t kFixedPath = 0xf1f1f1f1ULL;

void fill_uniform(Eigen::Ref<DenseMatrix> m, Rng& rng) {
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i) m(i, j) = d(rng);
}

void fill_normal(Eigen::Ref<DenseMatrix> m, Rng& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i) m(i, j) = d(rng);
}

DenseMatrix uniform(Index rows, Index cols, Rng& rng) {
  DenseMatrix m(rows, cols);
  fill_uniform(m, rng);
  return m;
}

DenseMatrix normal(Index rows, Index cols, Rng& rng) {
  DenseMatrix m(rows, cols);
  fill_normal(m, rng);
  return m;
}

DenseMatrix unit_noise(Index n, Index m, std::uint64_t seed, std::size_t k) {
  Rng rng = make_stream(seed, {kStreamE, static_cast<std::uint64_t>(k)});
  return normal(n, m, rng);
}

void append_double(std::string& out, double v) {
  if (std::isinf(v)) {
    out += v > 0 ? "inf" : "-inf";
    return;
  }
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, end);
}

}  // namespace

void validate(const SynthConfig& c) {
  if (c.n_voxels < 1 || c.n_timepoints < 1 || c.common_rank < 1 || c.trials < 1)
    throw ValidationError("synthetic config: all counts must be positive");
  if (c.n_subjects < 2) throw ValidationError("synthetic config: need at least two subjects");
  if (c.common_rank >= c.n_timepoints)
    throw ValidationError("synthetic config: common rank R = " + std::to_string(c.common_rank) +
                          " must be smaller than M = " + std::to_string(c.n_timepoints));
  if (!(c.c_ratio > 0.0) || !std::isfinite(c.c_ratio)) throw ValidationError("synthetic config: c_ratio must be positive");
  if (std::isnan(c.snr_db) || c.snr_db == -std::numeric_limits<double>::infinity())
    throw ValidationError("synthetic config: snr_db must be a number or +inf");
}

FixedFactors draw_fixed_factors(const SynthConfig& config, std::uint64_t seed) {
  validate(config);
  Rng rng = make_stream(seed, {kFixedPath});
  FixedFactors f;
  f.a = uniform(config.n_voxels, 1, rng).col(0);
  f.s = normal(config.n_timepoints, 1, rng).col(0);
  f.lambda = uniform(config.n_subjects, 1, rng).col(0);
  return f;
}

SynthDataset generate(const SynthConfig& config) {
  return generate(config, draw_fixed_factors(config, config.seed), config.seed);
}

SynthDataset generate(const SynthConfig& config, const FixedFactors& fixed, std::uint64_t realization_seed) {
  validate(config);
  const Index n = config.n_voxels;
  const Index m = config.n_timepoints;
  const auto k_views = static_cast<std::size_t>(config.n_subjects);
  const Index r_rest = config.common_rank - 1;
  if (fixed.a.size() != n || fixed.s.size() != m || fixed.lambda.size() != config.n_subjects)
    throw ValidationError("fixed factors do not match the configuration");

  SynthGroundTruth truth;
  truth.a_true = fixed.a;
  truth.s_true = fixed.s;
  truth.lambda_true = fixed.lambda;
  {
    Rng rng = make_stream(realization_seed, {kStreamA});
    truth.A = uniform(n, r_rest, rng);
  }
  truth.S.reserve(k_views);
  for (std::size_t k = 0; k < k_views; ++k) {
    Rng rng = make_stream(realization_seed, {kStreamS, static_cast<std::uint64_t>(k)});
    truth.S.push_back(normal(m, r_rest, rng));
  }

  // First pass over the unit-variance noise collects the norms needed for calibration; the
  // noise is regenerated from its stream while assembling so only one N x M block is live.
  std::vector<DenseMatrix> xs(k_views);
  double structured = 0.0, unit = 0.0, cross = 0.0;
  for (std::size_t k = 0; k < k_views; ++k) {
    xs[k] = truth.A * truth.S[k].transpose();
    const DenseMatrix e0 = unit_noise(n, m, realization_seed, k);
    structured += xs[k].squaredNorm();
    unit += e0.squaredNorm();
    cross += xs[k].cwiseProduct(e0).sum();
  }
  truth.sigma_e = structured > 0.0 ? std::sqrt(structured / (config.c_ratio * unit)) : 1.0;
  const double noise_energy = structured + 2.0 * truth.sigma_e * cross + truth.sigma_e * truth.sigma_e * unit;
  const double signal_energy = fixed.lambda.squaredNorm() * fixed.a.squaredNorm() * fixed.s.squaredNorm();
  if (std::isinf(config.snr_db) || noise_energy <= 0.0) {
    truth.beta = 0.0;
  } else {
    const double snr_linear = std::pow(10.0, config.snr_db / 10.0);
    truth.beta = std::sqrt(signal_energy / (snr_linear * noise_energy));
  }

  for (std::size_t k = 0; k < k_views; ++k) {
    DenseMatrix e = unit_noise(n, m, realization_seed, k);
    e *= truth.sigma_e;
    DenseMatrix& x = xs[k];
    x += e;
    x *= truth.beta;
    x.noalias() += (fixed.lambda(static_cast<Index>(k)) * fixed.a) * fixed.s.transpose();
    if (config.keep_noise) truth.noise.push_back(std::move(e));
  }

  return SynthDataset{MultiSubjectDataset(std::move(xs)), std::move(truth), config};
}

double realized_snr(const SynthDataset& ds) {
  double signal = 0.0, noise = 0.0;
  for (std::size_t k = 0; k < ds.data.n_subjects(); ++k) {
    const DenseMatrix rank_one =
        (ds.truth.lambda_true(static_cast<Index>(k)) * ds.truth.a_true) * ds.truth.s_true.transpose();
    signal += rank_one.squaredNorm();
    noise += (ds.data.subject(k) - rank_one).squaredNorm();
  }
  return signal / noise;
}

double correlation_coefficient(const Vector& x, const Vector& y) {
  if (x.size() != y.size()) throw ValidationError("correlation_coefficient: lengths differ");
  if (x.size() < 2) throw ValidationError("correlation_coefficient: need at least two samples");
  const Vector xc = x.array() - x.mean();
  const Vector yc = y.array() - y.mean();
  const double sx = xc.norm();
  const double sy = yc.norm();
  if (sx == 0.0 || sy == 0.0) throw ValidationError("correlation_coefficient: constant input");
  return std::clamp(xc.dot(yc) / (sx * sy), -1.0, 1.0);
}

double SweepResult::mean(double snr_db, const std::string& metric) const {
  for (const auto& c : cells)
    if (c.snr_db == snr_db && c.metric == metric) return c.mean;
  throw ValidationError("sweep has no cell for metric " + metric);
}

SweepResult run_snr_sweep(const SynthConfig& base, const SweepOptions& options) {
  validate(base);
  if (options.snr_grid_db.empty()) throw ValidationError("SNR sweep: empty grid");
  if (options.trials < 1) throw ValidationError("SNR sweep: trials must be >= 1");
  for (double snr : options.snr_grid_db)
    if (std::isnan(snr) || snr == -std::numeric_limits<double>::infinity())
      throw ValidationError("SNR sweep: grid values must be numbers or +inf");

  const FixedFactors fixed = draw_fixed_factors(base, options.seed);
  const auto& metrics = sweep_metrics();
  SweepResult result;

  for (std::size_t si = 0; si < options.snr_grid_db.size(); ++si) {
    SynthConfig cfg = base;
    cfg.snr_db = options.snr_grid_db[si];
    cfg.keep_noise = false;
    std::vector<TrialRecord> rows;
    for (int t = 0; t < options.trials; ++t) {
      const std::uint64_t stream = derive_seed(options.seed, {si, static_cast<std::uint64_t>(t)});
      const SynthDataset ds = generate(cfg, fixed, stream);

      pipeline::PipelineOptions popt;
      popt.rank = cfg.common_rank;
      popt.rel_tol = options.rel_tol;
      popt.variant = pipeline::Variant::m2;
      popt.fit_both = true;
      popt.ao = options.ao;
      popt.ao.seed = derive_seed(stream, {0xa0});
      if (ds.truth.beta == 0.0) {
        Index attainable = popt.rank;
        for (const auto& x : ds.data.subjects())
          attainable = std::min(attainable, linalg::thin_svd(x, options.rel_tol).rank);
        popt.rank = std::max<Index>(attainable, 1);
      }
      const auto res = pipeline::run_two_stage(ds.data, popt);
      const auto& m2 = res.rank_one;
      const auto& m1 = *res.alternate;

      TrialRecord rec;
      rec.snr_db = cfg.snr_db;
      rec.trial = t;
      rec.values = {std::abs(correlation_coefficient(res.temporal.g, fixed.s)),
                    std::abs(correlation_coefficient(m1.a, fixed.a)),
                    std::abs(correlation_coefficient(m2.a, fixed.a)),
                    std::abs(correlation_coefficient(m1.lambda, fixed.lambda)),
                    std::abs(correlation_coefficient(m2.lambda, fixed.lambda))};
      rows.push_back(std::move(rec));
    }
    for (std::size_t mi = 0; mi < metrics.size(); ++mi) {
      double mean = 0.0;
      for (const auto& r : rows) mean += r.values[mi];
      mean /= static_cast<double>(rows.size());
      double var = 0.0;
      for (const auto& r : rows) var += (r.values[mi] - mean) * (r.values[mi] - mean);
      const double sd = rows.size() > 1 ? std::sqrt(var / static_cast<double>(rows.size() - 1)) : 0.0;
      result.cells.push_back({cfg.snr_db, metrics[mi], mean, sd, static_cast<int>(rows.size())});
    }
    for (auto& r : rows) result.records.push_back(std::move(r));
  }
  return result;
}

std::string sweep_csv(const SweepResult& result) {
  std::string out = "snr_db,metric,mean,std,trials\n";
  for (const auto& c : result.cells) {
    append_double(out, c.snr_db);
    out += ',' + c.metric + ',';
    append_double(out, c.mean);
    out += ',';
    append_double(out, c.std);
    out += ',' + std::to_string(c.trials) + '\n';
  }
  return out;
}

std::string sweep_trials_csv(const SweepResult& result) {
  std::string out = "snr_db,trial,metric,value\n";
  const auto& metrics = sweep_metrics();
  for (const auto& r : result.records) {
    for (std::size_t mi = 0; mi < metrics.size(); ++mi) {
      append_double(out, r.snr_db);
      out += ',' + std::to_string(r.trial) + ',' + metrics[mi] + ',';
      append_double(out, r.values[mi]);
      out += '\n';
    }
  }
  return out;
}

}  // namespace fmrigcca::synth
