#include "fmrigcca/gcca.hpp"

#include "fmrigcca/error.hpp"
#include "fmrigcca/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace fmrigcca::gcca {

namespace {

using linalg::ThinSvd;

void check_views(std::span<const DenseMatrix> views, Index rank) {
  if (views.size() < 2) throw ValidationError("MAX-VAR needs at least two views");
  const Index n = views.front().rows();
  const Index m = views.front().cols();
  for (const auto& v : views)
    if (v.rows() != n || v.cols() != m) throw ValidationError("MAX-VAR views must share dimensions");
  if (rank < 1) throw ValidationError("MAX-VAR rank must be at least 1, got " + std::to_string(rank));
  if (rank > n) throw ValidationError("MAX-VAR rank " + std::to_string(rank) + " exceeds row count " + std::to_string(n));
}

std::vector<ThinSvd> view_svds(std::span<const DenseMatrix> views, Index rank, double rel_tol) {
  if (!(rel_tol > 0.0)) throw ValidationError("rel_tol must be positive");
  std::vector<ThinSvd> out;
  out.reserve(views.size());
  for (std::size_t k = 0; k < views.size(); ++k) {
    out.push_back(linalg::thin_svd(views[k], rel_tol));
    if (out.back().rank == 0) throw NumericalError("degenerate view " + std::to_string(k) + ": all-zero matrix");
    if (out.back().rank < rank)
      throw NumericalError("rank " + std::to_string(rank) + " exceeds the numerical rank " +
                           std::to_string(out.back().rank) + " of view " + std::to_string(k));
  }
  return out;
}

// Truncated x^+ * rhs given the SVD of x.
DenseMatrix apply_pinv(const ThinSvd& svd, const DenseMatrix& rhs) {
  const Index r = svd.rank;
  DenseMatrix coeffs = svd.u.leftCols(r).transpose() * rhs;
  coeffs = svd.s.head(r).cwiseInverse().asDiagonal() * coeffs;
  return svd.v.leftCols(r) * coeffs;
}

// Sum of projectors onto the numerical column spaces, lower triangle only.
DenseMatrix sum_of_projectors(const std::vector<ThinSvd>& svds, Index dim) {
  DenseMatrix m = DenseMatrix::Zero(dim, dim);
  for (const auto& svd : svds) m.selfadjointView<Eigen::Lower>().rankUpdate(svd.u.leftCols(svd.rank));
  return m;
}

// Fills the eigen-derived fields of a subspace from the leading eigenpairs.
void set_spectrum(CommonSubspace& out, const linalg::SymmetricEigen& eig, Index rank) {
  out.eigenvalues = eig.values;
  out.near_tie = eig.values.size() > rank && (eig.values(rank - 1) - eig.values(rank)) < kNearTieThreshold;
}

// trace(G^T M G) evaluated as sum_k ||U_k^T G||_F^2, with U_k expressed in the same coordinates as G.
double projector_objective(const std::vector<ThinSvd>& svds, const DenseMatrix& g) {
  double total = 0.0;
  for (const auto& svd : svds) total += (svd.u.leftCols(svd.rank).transpose() * g).squaredNorm();
  return total;
}

}  // namespace

const char* to_string(Route route) noexcept {
  switch (route) {
    case Route::automatic:
      return "automatic";
    case Route::direct:
      return "direct";
    case Route::compressed:
      return "compressed";
  }
  return "unknown";
}

DenseMatrix pseudoinverse_apply(const DenseMatrix& x, const DenseMatrix& rhs, double rel_tol) {
  if (!(rel_tol > 0.0)) throw ValidationError("pseudoinverse_apply: rel_tol must be positive");
  if (rhs.rows() != x.rows())
    throw ValidationError("pseudoinverse_apply: rhs has " + std::to_string(rhs.rows()) + " rows, expected " +
                          std::to_string(x.rows()));
  const ThinSvd svd = linalg::thin_svd(x, rel_tol);
  if (svd.rank == 0) throw NumericalError("pseudoinverse_apply: degenerate (all-zero) matrix");
  return apply_pinv(svd, rhs);
}

CommonSubspace maxvar_direct(std::span<const DenseMatrix> views, Index rank, double rel_tol) {
  check_views(views, rank);
  const Index n = views.front().rows();
  const auto svds = view_svds(views, rank, rel_tol);

  const DenseMatrix m = sum_of_projectors(svds, n);
  const auto eig = linalg::top_eigenpairs(m, std::min(rank + 1, n));

  CommonSubspace out;
  out.route = Route::direct;
  out.basis = eig.vectors.leftCols(rank);
  set_spectrum(out, eig, rank);
  out.loadings.reserve(views.size());
  for (const auto& svd : svds) out.loadings.push_back(apply_pinv(svd, out.basis));
  out.objective = projector_objective(svds, out.basis);
  return out;
}

CommonSubspace maxvar_compressed(std::span<const DenseMatrix> views, Index rank, double rel_tol) {
  check_views(views, rank);
  const Index n = views.front().rows();
  const Index m = views.front().cols();
  const Index k_views = static_cast<Index>(views.size());
  const Index km = k_views * m;
  if (km > n)
    throw ValidationError("compressed MAX-VAR needs K*M <= N (K*M = " + std::to_string(km) +
                          ", N = " + std::to_string(n) + "); use the direct route");

  // Y = [X_1 ... X_K] is factored in place; H_k are the column blocks of the triangular factor.
  DenseMatrix y(n, km);
  for (Index k = 0; k < k_views; ++k) y.middleCols(k * m, m) = views[static_cast<std::size_t>(k)];
  Eigen::HouseholderQR<Eigen::Ref<DenseMatrix>> qr(y);
  const DenseMatrix v = qr.matrixQR().topRows(km).triangularView<Eigen::Upper>();

  std::vector<DenseMatrix> blocks;
  blocks.reserve(views.size());
  for (Index k = 0; k < k_views; ++k) blocks.push_back(v.middleCols(k * m, m));
  const auto svds = view_svds(blocks, rank, rel_tol);

  const DenseMatrix m_small = sum_of_projectors(svds, km);
  const auto eig = linalg::top_eigenpairs(m_small, std::min(rank + 1, km));
  DenseMatrix top = eig.vectors.leftCols(rank);

  DenseMatrix lifted = DenseMatrix::Zero(n, rank);
  lifted.topRows(km) = top;
  lifted.applyOnTheLeft(qr.householderQ());
  // Sign convention is defined on G; carry the flips back to the small-space eigenvectors.
  for (Index j = 0; j < rank; ++j) {
    Index arg = 0;
    lifted.col(j).cwiseAbs().maxCoeff(&arg);
    if (lifted(arg, j) < 0.0) {
      lifted.col(j) = -lifted.col(j);
      top.col(j) = -top.col(j);
    }
  }

  CommonSubspace out;
  out.route = Route::compressed;
  out.basis = std::move(lifted);
  set_spectrum(out, eig, rank);
  out.loadings.reserve(views.size());
  // X_k^+ G = H_k^+ U_Y^T G = H_k^+ * top.
  for (const auto& svd : svds) out.loadings.push_back(apply_pinv(svd, top));
  out.objective = projector_objective(svds, top);
  return out;
}

CommonSubspace maxvar(std::span<const DenseMatrix> views, Index rank, double rel_tol, Route route) {
  if (route == Route::automatic) {
    check_views(views, rank);
    const Index km = static_cast<Index>(views.size()) * views.front().cols();
    route = km <= views.front().rows() ? Route::compressed : Route::direct;
  }
  return route == Route::compressed ? maxvar_compressed(views, rank, rel_tol) : maxvar_direct(views, rank, rel_tol);
}

OrthonormalFactorization orthonormal_factorization(const DenseMatrix& y) {
  if (y.rows() < y.cols())
    throw ValidationError("orthonormal_factorization: needs rows >= cols (got " + std::to_string(y.rows()) + "x" +
                          std::to_string(y.cols()) + "); use the direct route");
  Eigen::HouseholderQR<DenseMatrix> qr(y);
  OrthonormalFactorization out;
  out.u = qr.householderQ() * DenseMatrix::Identity(y.rows(), y.cols());
  out.v = qr.matrixQR().topRows(y.cols()).triangularView<Eigen::Upper>();
  return out;
}

double subspace_gap(const DenseMatrix& g1, const DenseMatrix& g2) {
  constexpr double kOrthoTol = 1e-8;
  if (g1.rows() != g2.rows()) throw ValidationError("subspace_gap: row counts differ");
  if (g1.cols() != g2.cols()) throw ValidationError("subspace_gap: column counts differ");
  if (g1.cols() == 0) throw ValidationError("subspace_gap: empty bases");
  if (linalg::orthonormality_error(g1) > kOrthoTol || linalg::orthonormality_error(g2) > kOrthoTol)
    throw ValidationError("subspace_gap: inputs must be columnwise orthonormal");

  // sin(theta_max) = ||(I - P_1) g2||_2; this form stays accurate for nearly equal subspaces,
  // where sqrt(1 - cos^2) cancels.
  const DenseMatrix residual = g2 - g1 * (g1.transpose() * g2);
  const DenseMatrix gram = residual.transpose() * residual;
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(gram, Eigen::EigenvaluesOnly);
  const double top = std::max(0.0, es.eigenvalues().maxCoeff());
  return std::clamp(std::sqrt(top), 0.0, 1.0);
}

}  // namespace fmrigcca::gcca
