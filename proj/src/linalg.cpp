#include "fmrigcca/linalg.hpp"

#include "fmrigcca/error.hpp"

#include <lapacke.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <thread>
#include <vector>

namespace fmrigcca::linalg {

namespace {

Index count_rank(const Vector& s, double rel_tol) {
  if (s.size() == 0 || s(0) <= 0.0) return 0;
  const double cutoff = rel_tol * s(0);
  Index r = 0;
  while (r < s.size() && s(r) >= cutoff) ++r;
  return r;
}

}  // namespace

ThinSvd thin_svd(const DenseMatrix& x, double rel_tol) {
  ThinSvd out;
  if (x.rows() >= 2 * x.cols() && x.cols() > 0) {
    // Tall input: reduce to the square triangular factor first.
    Eigen::HouseholderQR<DenseMatrix> qr(x);
    const Index m = x.cols();
    DenseMatrix r = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
    Eigen::BDCSVD<DenseMatrix> svd(r, Eigen::ComputeThinU | Eigen::ComputeThinV);
    out.u = qr.householderQ() * (DenseMatrix(x.rows(), m) << svd.matrixU(),
                                 DenseMatrix::Zero(x.rows() - m, m))
                                    .finished();
    out.s = svd.singularValues();
    out.v = svd.matrixV();
  } else {
    Eigen::BDCSVD<DenseMatrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
    out.u = svd.matrixU();
    out.s = svd.singularValues();
    out.v = svd.matrixV();
  }
  out.rank = count_rank(out.s, rel_tol);
  return out;
}

DenseMatrix column_basis(const ThinSvd& svd) { return svd.u.leftCols(svd.rank); }

SymmetricEigen top_eigenpairs(const DenseMatrix& sym, Index count) {
  const Index n = sym.rows();
  if (sym.cols() != n) throw ValidationError("top_eigenpairs: matrix is not square");
  if (count < 1 || count > n) throw ValidationError("top_eigenpairs: requested count out of range");

  DenseMatrix work = sym;
  Vector w(n);
  DenseMatrix z(n, count);
  std::vector<lapack_int> support(2 * static_cast<std::size_t>(count));
  lapack_int found = 0;
  const lapack_int info = LAPACKE_dsyevr(
      LAPACK_COL_MAJOR, 'V', 'I', 'L', static_cast<lapack_int>(n), work.data(),
      static_cast<lapack_int>(n), 0.0, 0.0, static_cast<lapack_int>(n - count + 1),
      static_cast<lapack_int>(n), LAPACKE_dlamch('S'), &found, w.data(), z.data(),
      static_cast<lapack_int>(n), support.data());
  if (info != 0 || found != count) throw NumericalError("symmetric eigensolver failed to converge");

  SymmetricEigen out;
  out.values = w.head(count).reverse();
  out.vectors = z.rowwise().reverse();
  fix_column_signs(out.vectors);
  return out;
}

void fix_column_signs(DenseMatrix& m) {
  for (Index j = 0; j < m.cols(); ++j) {
    Index arg = 0;
    m.col(j).cwiseAbs().maxCoeff(&arg);
    if (m(arg, j) < 0.0) m.col(j) = -m.col(j);
  }
}

double orthonormality_error(const DenseMatrix& m) {
  if (m.cols() == 0) return 0.0;
  DenseMatrix gram = m.transpose() * m;
  gram.diagonal().array() -= 1.0;
  return gram.cwiseAbs().maxCoeff();
}

void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace fmrigcca::linalg
