#include "fmrigcca/error.hpp"
#include "fmrigcca/gcca.hpp"
#include "fmrigcca/pipeline.hpp"
#include "fmrigcca/synth.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>

using namespace fmrigcca;
using testutil::gaussian;
using testutil::uniform01;

namespace {

double abs_corr(const Vector& x, const Vector& y) { return std::abs(synth::correlation_coefficient(x, y)); }

double residual(const MultiSubjectDataset& data, const Vector& a, const Vector& lambda, const Vector& g) {
  double f = 0.0;
  for (std::size_t k = 0; k < data.n_subjects(); ++k)
    f += (data.subject(k) - lambda(Index(k)) * a * g.transpose()).squaredNorm();
  return f;
}

struct RankOneData {
  Vector a, lambda, g;
  MultiSubjectDataset data;
};

RankOneData exact_rank_one(Index n, Index m, Index k, std::uint64_t seed) {
  const Vector a = uniform01(n, 1, seed).col(0);
  const Vector lambda = uniform01(k, 1, seed + 1).col(0).array() + 0.1;
  const Vector g = gaussian(m, 1, seed + 2).col(0).normalized();
  std::vector<DenseMatrix> views;
  for (Index i = 0; i < k; ++i) views.push_back(lambda(i) * a * g.transpose());
  return {a, lambda, g, MultiSubjectDataset(std::move(views))};
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("common column across loadings is found") {
  const Index m = 30, r = 4;
  const Vector c = gaussian(m, 1, 1).col(0);
  std::vector<DenseMatrix> q;
  for (int k = 0; k < 5; ++k) {
    DenseMatrix qk(m, r);
    qk << c, gaussian(m, r - 1, 10 + k);
    q.push_back(qk);
  }
  const auto t = pipeline::estimate_common_temporal(q);
  CHECK(abs_corr(t.g, c) > 1.0 - 1e-6);
  CHECK(std::abs(t.g.norm() - 1.0) < 1e-12);
  CHECK(t.objective == doctest::Approx(5.0).epsilon(1e-9));
  REQUIRE(t.weights.size() == 5);
  for (int k = 0; k < 5; ++k) CHECK((q[k] * t.weights[k] - t.g).norm() < 1e-9);
}

TEST_CASE("identical orthonormal loadings keep g in their span") {
  const DenseMatrix u = testutil::orthonormal(12, 3, 2);
  std::vector<DenseMatrix> q = {u, u};
  const auto t = pipeline::estimate_common_temporal(q);
  CHECK((t.g - u * (u.transpose() * t.g)).norm() < 1e-10);
  CHECK(t.near_tie);
}

TEST_CASE("loadings with orthogonal spans") {
  const DenseMatrix u = testutil::orthonormal(12, 4, 3);
  std::vector<DenseMatrix> q = {u.leftCols(2), u.rightCols(2)};
  const auto t = pipeline::estimate_common_temporal(q);
  CHECK(t.objective <= 1.0 + 1e-9);
}

TEST_CASE("degenerate loadings") {
  std::vector<DenseMatrix> q = {DenseMatrix::Zero(5, 2), gaussian(5, 2, 1)};
  CHECK_THROWS_AS(pipeline::estimate_common_temporal(q), NumericalError);
  std::vector<DenseMatrix> one = {gaussian(5, 2, 1)};
  CHECK_THROWS_AS(pipeline::estimate_common_temporal(one), ValidationError);
}

TEST_CASE("projection onto a subspace") {
  const DenseMatrix g = testutil::orthonormal(40, 3, 5);
  const MultiSubjectDataset inside({g * gaussian(3, 6, 6), g * gaussian(3, 6, 7)});
  const auto same = pipeline::project_onto_subspace(g, inside);
  for (std::size_t k = 0; k < 2; ++k) CHECK((same.subject(k) - inside.subject(k)).cwiseAbs().maxCoeff() < 1e-10);

  const MultiSubjectDataset id({DenseMatrix::Identity(3, 3), DenseMatrix::Identity(3, 3)});
  const auto p = pipeline::project_onto_subspace(DenseMatrix::Identity(3, 1), id);
  CHECK(p.subject(0).bottomRows(2).isZero(0.0));
  CHECK(p.subject(0)(0, 0) == 1.0);

  const MultiSubjectDataset rnd({gaussian(40, 6, 8), gaussian(40, 6, 9)});
  const auto once = pipeline::project_onto_subspace(g, rnd);
  const auto twice = pipeline::project_onto_subspace(g, once);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(once.subject(k).norm() <= rnd.subject(k).norm());
    CHECK((twice.subject(k) - once.subject(k)).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK_THROWS_AS(pipeline::project_onto_subspace(testutil::orthonormal(39, 3, 1), rnd), ValidationError);
}

TEST_CASE("projected problem equals the problem of the projected data") {
  const DenseMatrix g = testutil::orthonormal(30, 4, 11);
  const MultiSubjectDataset data({gaussian(30, 7, 12), gaussian(30, 7, 13), gaussian(30, 7, 14)});
  const Vector t = gaussian(7, 1, 15).col(0).normalized();
  const auto a = pipeline::make_projected_problem(g, data, t);
  const auto b = pipeline::make_problem(pipeline::project_onto_subspace(g, data), t);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK((a.responses[k] - b.responses[k]).norm() < 1e-12);
    CHECK(a.energies[k] == doctest::Approx(b.energies[k]).epsilon(1e-12));
  }
}

TEST_CASE("exact rank-one data is recovered") {
  const auto d = exact_rank_one(300, 20, 6, 21);
  const auto est = pipeline::fit_rank_one_nonneg(d.data, d.g, {});
  CHECK(abs_corr(est.a, d.a) > 1.0 - 1e-8);
  CHECK(abs_corr(est.lambda, d.lambda) > 1.0 - 1e-8);
  CHECK(std::abs(est.a.norm() - 1.0) < 1e-12);
  CHECK(est.a.minCoeff() >= 0.0);
  CHECK(est.lambda.minCoeff() >= 0.0);
  CHECK(est.g.isApprox(d.g));
  CHECK(est.fit < 1e-10 * d.data.subject(0).squaredNorm());
  CHECK(est.n_inits_used == 10);
  CHECK(est.converged);
}

TEST_CASE("negating g at the input gives the same estimate") {
  const auto d = exact_rank_one(200, 15, 5, 31);
  const auto plus = pipeline::fit_rank_one_nonneg(d.data, d.g, {});
  const auto minus = pipeline::fit_rank_one_nonneg(d.data, Vector(-d.g), {});
  CHECK((plus.a - minus.a).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((plus.lambda - minus.lambda).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(plus.fit == minus.fit);
}

TEST_CASE("a planted zero intensity stays zero") {
  auto d = exact_rank_one(150, 12, 3, 41);
  d.lambda(2) = 0.0;
  std::vector<DenseMatrix> views;
  for (Index i = 0; i < 3; ++i) views.push_back(d.lambda(i) * d.a * d.g.transpose());
  const auto est = pipeline::fit_rank_one_nonneg(MultiSubjectDataset(views), d.g, {});
  CHECK(est.lambda(2) < 1e-8 * est.lambda.maxCoeff());
}

TEST_CASE("objective never increases along the iterations") {
  pipeline::AoOptions opts;
  opts.record_history = true;
  for (int t = 0; t < 10; ++t) {
    const MultiSubjectDataset data({gaussian(60, 8, 100 + 3 * t), gaussian(60, 8, 101 + 3 * t), gaussian(60, 8, 102 + 3 * t)});
    const Vector g = gaussian(8, 1, 900 + t).col(0).normalized();
    opts.seed = t;
    const auto est = pipeline::fit_rank_one_nonneg(data, g, opts);
    for (const auto& at : est.attempts) {
      if (at.collapsed) continue;
      for (std::size_t i = 1; i < at.history.size(); ++i)
        CHECK(at.history[i] <= at.history[i - 1] + 1e-12 * std::abs(at.history[i - 1]));
    }
  }
}

TEST_CASE("the reported fit is the data residual") {
  const MultiSubjectDataset data({uniform01(50, 6, 1), uniform01(50, 6, 2), uniform01(50, 6, 3)});
  const Vector g = Vector::Ones(6).normalized();
  const auto est = pipeline::fit_rank_one_nonneg(data, g, {});
  CHECK(est.fit == doctest::Approx(residual(data, est.a, est.lambda, est.g)).epsilon(1e-10));
}

TEST_CASE("positive scaling of the data") {
  const MultiSubjectDataset data({uniform01(80, 6, 4), uniform01(80, 6, 5), uniform01(80, 6, 6)});
  std::vector<DenseMatrix> scaled;
  for (const auto& x : data.subjects()) scaled.push_back(3.7 * x);
  const Vector g = Vector::Ones(6).normalized();
  const auto e1 = pipeline::fit_rank_one_nonneg(data, g, {});
  const auto e2 = pipeline::fit_rank_one_nonneg(MultiSubjectDataset(scaled), g, {});
  CHECK((e1.a - e2.a).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((3.7 * e1.lambda - e2.lambda).cwiseAbs().maxCoeff() < 1e-8 * e2.lambda.maxCoeff());
}

TEST_CASE("subject permutation permutes lambda") {
  std::vector<DenseMatrix> views;
  for (int k = 0; k < 5; ++k) views.push_back(uniform01(70, 6, 200 + k));
  const std::vector<std::size_t> perm = {3, 0, 4, 1, 2};
  const MultiSubjectDataset data(views);
  const Vector g = Vector::Ones(6).normalized();
  pipeline::AoOptions opts;
  opts.conv_tol = 1e-14;
  opts.max_iters = 5000;
  const auto e1 = pipeline::fit_rank_one_nonneg(data, g, opts);
  const auto e2 = pipeline::fit_rank_one_nonneg(data.select(perm), g, opts);
  CHECK((e1.a - e2.a).cwiseAbs().maxCoeff() < 1e-8);
  for (std::size_t i = 0; i < perm.size(); ++i) CHECK(e2.lambda(Index(i)) == doctest::Approx(e1.lambda(Index(perm[i]))).epsilon(1e-8));
}

TEST_CASE("results do not depend on the thread count") {
  const MultiSubjectDataset data({gaussian(60, 8, 7), gaussian(60, 8, 8), gaussian(60, 8, 9)});
  const Vector g = gaussian(8, 1, 10).col(0).normalized();
  pipeline::AoOptions one, many;
  many.threads = 4;
  const auto a = pipeline::fit_rank_one_nonneg(data, g, one);
  const auto b = pipeline::fit_rank_one_nonneg(data, g, many);
  CHECK(a.a == b.a);
  CHECK(a.lambda == b.lambda);
  CHECK(a.fit == b.fit);
}

TEST_CASE("fit preconditions") {
  const auto d = exact_rank_one(20, 5, 3, 51);
  pipeline::AoOptions bad;
  bad.n_inits = 0;
  CHECK_THROWS_AS(pipeline::fit_rank_one_nonneg(d.data, d.g, bad), ValidationError);
  CHECK_THROWS_AS(pipeline::fit_rank_one_nonneg(d.data, Vector(2.0 * d.g), {}), ValidationError);
  // Data orthogonal to g leave nothing to fit along either sign.
  const Vector e1 = Vector::Unit(5, 0);
  std::vector<DenseMatrix> views = {gaussian(20, 5, 52), gaussian(20, 5, 53)};
  for (auto& x : views) x.col(0).setZero();
  CHECK_THROWS_AS(pipeline::fit_rank_one_nonneg(MultiSubjectDataset(views), e1, {}), NumericalError);
}

TEST_CASE("two-stage pipeline on an exactly planted model") {
  // X_k = lambda_k a s^T + A S_k^T with the S_k orthogonal to s.
  const Index n = 500, m = 30, r = 4;
  const std::size_t k = 6;
  const Vector a = uniform01(n, 1, 61).col(0);
  const Vector s = gaussian(m, 1, 62).col(0);
  const Vector lambda = uniform01(Index(k), 1, 63).col(0).array() + 0.2;
  const DenseMatrix big_a = uniform01(n, r - 1, 64);
  const Vector sn = s.normalized();
  std::vector<DenseMatrix> views;
  for (std::size_t i = 0; i < k; ++i) {
    DenseMatrix sk = gaussian(m, r - 1, 70 + i);
    sk -= sn * (sn.transpose() * sk);
    views.push_back(lambda(Index(i)) * a * s.transpose() + big_a * sk.transpose());
  }
  const MultiSubjectDataset data(views);
  pipeline::PipelineOptions opts;
  opts.rank = r;
  opts.fit_both = true;
  const auto res = pipeline::run_two_stage(data, opts);
  DenseMatrix w(n, r);
  w << a, big_a;
  CHECK(gcca::subspace_gap(res.subspace.basis, testutil::orth(w)) < 1e-8);
  CHECK(abs_corr(res.temporal.g, s) > 1.0 - 1e-6);
  CHECK(abs_corr(res.rank_one.a, a) > 1.0 - 1e-6);
  CHECK(abs_corr(res.rank_one.lambda, lambda) > 1.0 - 1e-6);
  REQUIRE(res.alternate.has_value());
  CHECK(res.alternate->variant == pipeline::Variant::m1);
  CHECK(abs_corr(res.alternate->a, a) > 1.0 - 1e-6);
}

TEST_CASE("M2 fit is no worse than M1 on the projected objective") {
  synth::SynthConfig cfg;
  cfg.n_voxels = 1500;
  cfg.n_timepoints = 30;
  cfg.n_subjects = 6;
  cfg.common_rank = 5;
  cfg.snr_db = -15.0;
  cfg.seed = 3;
  const auto ds = synth::generate(cfg);
  pipeline::PipelineOptions opts;
  opts.rank = 5;
  opts.fit_both = true;
  const auto res = pipeline::run_two_stage(ds.data, opts);
  const auto projected = pipeline::project_onto_subspace(res.subspace.basis, ds.data);
  const auto& m1 = *res.alternate;
  CHECK(res.rank_one.fit <= residual(projected, m1.a, m1.lambda, m1.g) * (1.0 + 1e-9));
}

TEST_CASE("stage failures name the stage") {
  const MultiSubjectDataset data({gaussian(40, 5, 1), gaussian(40, 5, 2)});
  pipeline::PipelineOptions opts;
  opts.rank = 6;
  try {
    pipeline::run_two_stage(data, opts);
    FAIL("expected an error");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("stage 1") != std::string::npos);
  }
}

}
