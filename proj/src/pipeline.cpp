#include "fmrigcca/pipeline.hpp"

#include "fmrigcca/error.hpp"
#include "fmrigcca/linalg.hpp"
#include "fmrigcca/random.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace fmrigcca::pipeline {

const char* to_string(Variant v) noexcept { return v == Variant::m1 ? "m1" : "m2"; }

TemporalEstimate estimate_common_temporal(std::span<const DenseMatrix> loadings, double rel_tol) {
  if (loadings.size() < 2) throw ValidationError("estimate_common_temporal: needs at least two loading matrices");
  const auto sol = gcca::maxvar_direct(loadings, 1, rel_tol);
  TemporalEstimate out;
  out.g = sol.basis.col(0);
  out.g.normalize();
  out.weights.reserve(loadings.size());
  for (const auto& d : sol.loadings) out.weights.emplace_back(d.col(0));
  out.objective = sol.objective;
  out.near_tie = sol.near_tie;
  return out;
}

MultiSubjectDataset project_onto_subspace(const DenseMatrix& basis, const MultiSubjectDataset& data) {
  if (basis.rows() != data.n_voxels())
    throw ValidationError("project_onto_subspace: basis has " + std::to_string(basis.rows()) + " rows, data has " +
                          std::to_string(data.n_voxels()) + " voxels");
  std::vector<DenseMatrix> out;
  out.reserve(data.n_subjects());
  for (const auto& x : data.subjects()) out.push_back(basis * (basis.transpose() * x));
  return MultiSubjectDataset(std::move(out), data.labels());
}

namespace {

void check_unit(const Vector& g, Index m) {
  if (g.size() != m) throw ValidationError("temporal vector length does not match the number of time points");
  if (std::abs(g.norm() - 1.0) > 1e-8) throw ValidationError("temporal vector must have unit norm");
}

struct AttemptResult {
  AttemptTrace trace;
  Vector a;
  Vector lambda;
  int iterations = 0;
};

double objective(const RankOneProblem& p, double total_energy, const Vector& a, const Vector& lambda, int sign) {
  double cross = 0.0;
  for (std::size_t k = 0; k < p.responses.size(); ++k) cross += lambda(static_cast<Index>(k)) * a.dot(p.responses[k]);
  return total_energy - 2.0 * sign * cross + lambda.squaredNorm() * a.squaredNorm();
}

AttemptResult run_attempt(const RankOneProblem& p, double total_energy, int sign, int init, const AoOptions& opt) {
  const Index n = p.responses.front().size();
  const Index k_views = static_cast<Index>(p.responses.size());
  const double s = static_cast<double>(sign);

  AttemptResult r;
  r.trace.sign = sign;
  r.trace.init = init;

  Rng rng = make_stream(opt.seed, {static_cast<std::uint64_t>(init)});
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  r.a.resize(n);
  for (Index i = 0; i < n; ++i) r.a(i) = unif(rng);
  r.lambda.resize(k_views);
  for (Index k = 0; k < k_views; ++k) r.lambda(k) = unif(rng);

  double f = objective(p, total_energy, r.a, r.lambda, sign);
  if (opt.record_history) r.trace.history.push_back(f);

  Vector combo(n);
  for (int it = 0; it < opt.max_iters; ++it) {
    const double f_start = f;

    const double a_sq = r.a.squaredNorm();
    if (a_sq <= 0.0) {
      r.trace.collapsed = true;
      break;
    }
    for (Index k = 0; k < k_views; ++k)
      r.lambda(k) = std::max(0.0, s * r.a.dot(p.responses[static_cast<std::size_t>(k)]) / a_sq);
    if (opt.record_history) r.trace.history.push_back(objective(p, total_energy, r.a, r.lambda, sign));

    const double lambda_sq = r.lambda.squaredNorm();
    if (lambda_sq <= 0.0) {
      r.trace.collapsed = true;
      break;
    }
    combo.setZero();
    for (Index k = 0; k < k_views; ++k) combo.noalias() += r.lambda(k) * p.responses[static_cast<std::size_t>(k)];
    r.a = (s * combo / lambda_sq).cwiseMax(0.0);

    f = objective(p, total_energy, r.a, r.lambda, sign);
    if (opt.record_history) r.trace.history.push_back(f);
    r.iterations = it + 1;

    if (r.a.squaredNorm() <= 0.0) {
      r.trace.collapsed = true;
      break;
    }
    const double scale = std::max(std::abs(f_start), std::numeric_limits<double>::min());
    if ((f_start - f) <= opt.conv_tol * scale) {
      r.trace.converged = true;
      break;
    }
  }
  r.trace.fit = r.trace.collapsed ? total_energy : f;
  return r;
}

}  // namespace

RankOneProblem make_problem(const MultiSubjectDataset& data, const Vector& g) {
  check_unit(g, data.n_timepoints());
  RankOneProblem p;
  p.responses.reserve(data.n_subjects());
  p.energies.reserve(data.n_subjects());
  for (const auto& x : data.subjects()) {
    p.responses.emplace_back(x * g);
    p.energies.push_back(x.squaredNorm());
  }
  return p;
}

RankOneProblem make_projected_problem(const DenseMatrix& basis, const MultiSubjectDataset& data, const Vector& g) {
  check_unit(g, data.n_timepoints());
  if (basis.rows() != data.n_voxels()) throw ValidationError("projected problem: basis/data voxel count mismatch");
  RankOneProblem p;
  p.responses.reserve(data.n_subjects());
  p.energies.reserve(data.n_subjects());
  for (const auto& x : data.subjects()) {
    const DenseMatrix coords = basis.transpose() * x;  // R x M
    p.responses.emplace_back(basis * (coords * g));
    p.energies.push_back(coords.squaredNorm());
  }
  return p;
}

RankOneEstimate fit_rank_one_nonneg(const RankOneProblem& problem, const Vector& g, const AoOptions& options,
                                    Variant variant) {
  if (options.n_inits < 1) throw ValidationError("fit_rank_one_nonneg: n_inits must be at least 1");
  if (options.max_iters < 1) throw ValidationError("fit_rank_one_nonneg: max_iters must be at least 1");
  if (!(options.conv_tol >= 0.0)) throw ValidationError("fit_rank_one_nonneg: conv_tol must be nonnegative");
  if (problem.responses.empty() || problem.responses.size() != problem.energies.size())
    throw ValidationError("fit_rank_one_nonneg: empty or inconsistent problem");
  const Index n = problem.responses.front().size();
  for (const auto& y : problem.responses)
    if (y.size() != n) throw ValidationError("fit_rank_one_nonneg: responses differ in length");
  if (std::abs(g.norm() - 1.0) > 1e-8) throw ValidationError("fit_rank_one_nonneg: g must have unit norm");

  double total = 0.0;
  for (double e : problem.energies) total += e;

  const std::size_t n_attempts = 2 * static_cast<std::size_t>(options.n_inits);
  std::vector<AttemptResult> results(n_attempts);
  linalg::parallel_for(n_attempts, options.threads, [&](std::size_t i) {
    const int sign = i < static_cast<std::size_t>(options.n_inits) ? 1 : -1;
    const int init = static_cast<int>(i % static_cast<std::size_t>(options.n_inits));
    results[i] = run_attempt(problem, total, sign, init, options);
  });

  RankOneEstimate out;
  out.variant = variant;
  out.n_inits_used = static_cast<int>(n_attempts);
  const AttemptResult* best = nullptr;
  for (const auto& r : results) {
    if (r.trace.collapsed) {
      ++out.collapsed_attempts;
      continue;
    }
    if (best == nullptr || r.trace.fit < best->trace.fit) best = &r;
  }
  if (best == nullptr || best->a.squaredNorm() <= 0.0)
    throw NumericalError("rank-one fit collapsed to a = 0 for every start: no nonnegative rank-one structure along g");

  const double a_norm = best->a.norm();
  out.a = best->a / a_norm;
  out.lambda = best->lambda * a_norm;
  out.g = static_cast<double>(best->trace.sign) * g;
  out.fit = best->trace.fit;
  out.iterations = best->iterations;
  out.converged = best->trace.converged;
  out.attempts.reserve(results.size());
  for (auto& r : results) out.attempts.push_back(std::move(r.trace));
  return out;
}

RankOneEstimate fit_rank_one_nonneg(const MultiSubjectDataset& data, const Vector& g, const AoOptions& options,
                                    Variant variant) {
  return fit_rank_one_nonneg(make_problem(data, g), g, options, variant);
}

namespace {

template <typename F>
auto with_stage(const char* stage, F&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string(stage) + ": " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(std::string(stage) + ": " + e.what());
  }
}

}  // namespace

PipelineResult run_two_stage(const MultiSubjectDataset& data, const PipelineOptions& options) {
  PipelineResult out;
  out.options = options;
  out.subspace = with_stage("stage 1 (common spatial subspace)",
                            [&] { return gcca::maxvar(data, options.rank, options.rel_tol, options.route); });
  out.temporal = with_stage("stage 2 (common temporal component)", [&] {
    return estimate_common_temporal(out.subspace.loadings, options.rel_tol);
  });

  auto fit = [&](Variant v) {
    return with_stage("stage 3 (nonnegative rank-one fit)", [&] {
      const RankOneProblem p = v == Variant::m2 ? make_projected_problem(out.subspace.basis, data, out.temporal.g)
                                                : make_problem(data, out.temporal.g);
      return fit_rank_one_nonneg(p, out.temporal.g, options.ao, v);
    });
  };
  out.rank_one = fit(options.variant);
  if (options.fit_both) out.alternate = fit(options.variant == Variant::m2 ? Variant::m1 : Variant::m2);
  return out;
}

}  // namespace fmrigcca::pipeline
