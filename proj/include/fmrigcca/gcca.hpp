#pragma once

#include "fmrigcca/types.hpp"

#include <span>
#include <vector>

namespace fmrigcca::gcca {

/// Default singular-value truncation, relative to the largest singular value.
inline constexpr double kDefaultRelTol = 1e-10;

/// Eigenvalue separation at position R below which the split is reported as a near tie.
inline constexpr double kNearTieThreshold = 1e-8;

enum class Route { automatic, direct, compressed };

/// Solution of the MAX-VAR problem
///   min_{Q_k, G} sum_k ||X_k Q_k - G||_F^2  s.t.  G^T G = I_R.
///
/// `basis` holds the top-R eigenvectors of M = sum_k X_k X_k^+, `loadings[k]` = X_k^+ G and
/// `objective` = trace(G^T M G). Columns follow the largest-entry-positive sign convention.
struct CommonSubspace {
  DenseMatrix basis;
  std::vector<DenseMatrix> loadings;
  double objective = 0.0;
  Route route = Route::direct;
  /// Leading eigenvalues of M: the R selected ones, plus the (R+1)-th when it exists.
  Vector eigenvalues;
  /// True when lambda_R - lambda_{R+1} < kNearTieThreshold; the basis is then not unique.
  bool near_tie = false;

  Index rank() const noexcept { return basis.cols(); }
};

/// x^+ * rhs through a thin SVD of x, dropping singular values below rel_tol * s_max.
/// Throws NumericalError when x is all zeros.
DenseMatrix pseudoinverse_apply(const DenseMatrix& x, const DenseMatrix& rhs, double rel_tol = kDefaultRelTol);

/// Forms the N x N matrix M explicitly and eigendecomposes it.
CommonSubspace maxvar_direct(std::span<const DenseMatrix> views, Index rank, double rel_tol = kDefaultRelTol);

/// Same solution computed from Y = [X_1 ... X_K] = U_Y V_Y: the per-view blocks H_k of V_Y give
/// the KM x KM matrix sum_k H_k H_k^+, whose eigenvectors lift back through U_Y. Requires
/// K*M <= N; the N x N matrix is never formed.
CommonSubspace maxvar_compressed(std::span<const DenseMatrix> views, Index rank,
                                 double rel_tol = kDefaultRelTol);

/// Dispatches on `route`; `automatic` picks compressed whenever K*M <= N.
CommonSubspace maxvar(std::span<const DenseMatrix> views, Index rank, double rel_tol = kDefaultRelTol,
                      Route route = Route::automatic);

inline CommonSubspace maxvar(const MultiSubjectDataset& data, Index rank, double rel_tol = kDefaultRelTol,
                             Route route = Route::automatic) {
  return maxvar(data.subjects(), rank, rel_tol, route);
}

/// y = u * v with u^T u = I (Householder QR). Requires rows >= cols.
struct OrthonormalFactorization {
  DenseMatrix u;
  DenseMatrix v;
};
OrthonormalFactorization orthonormal_factorization(const DenseMatrix& y);

/// Spectral-norm distance ||P_1 - P_2||_2 between the column spaces of two orthonormal bases
/// with equal column counts: the sine of the largest principal angle, in [0, 1].
double subspace_gap(const DenseMatrix& g1, const DenseMatrix& g2);

const char* to_string(Route route) noexcept;

}  // namespace fmrigcca::gcca
