#pragma once

#include "fmrigcca/types.hpp"

#include <cstddef>
#include <functional>

namespace fmrigcca::linalg {

/// Thin SVD x = u * diag(s) * v^T with singular values in descending order.
/// `rank` counts singular values with s_i >= rel_tol * s_max (0 for an all-zero input).
struct ThinSvd {
  DenseMatrix u;
  Vector s;
  DenseMatrix v;
  Index rank = 0;
};

ThinSvd thin_svd(const DenseMatrix& x, double rel_tol);

/// Orthonormal basis of the numerical column space (first `rank` left singular vectors).
DenseMatrix column_basis(const ThinSvd& svd);

/// Eigenpairs of a symmetric matrix, eigenvalues descending.
struct SymmetricEigen {
  Vector values;
  DenseMatrix vectors;
};

/// The `count` largest eigenpairs of the symmetric matrix `sym` (only its lower triangle is
/// read). Eigenvectors follow the sign convention of `fix_column_signs`.
SymmetricEigen top_eigenpairs(const DenseMatrix& sym, Index count);

/// Flip each column so that its largest-magnitude entry is positive (first such entry on ties).
void fix_column_signs(DenseMatrix& m);

/// max_ij |m^T m - I|.
double orthonormality_error(const DenseMatrix& m);

/// Runs fn(i) for i in [0, count) on up to `threads` workers. Work items must not share
/// mutable state. Exceptions from workers are rethrown (the first one by index).
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace fmrigcca::linalg
