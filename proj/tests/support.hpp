#pragma once

#include "fmrigcca/random.hpp"
#include "fmrigcca/types.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

namespace testutil {

using fmrigcca::DenseMatrix;
using fmrigcca::Index;
using fmrigcca::Vector;

inline DenseMatrix gaussian(Index rows, Index cols, std::uint64_t seed) {
  fmrigcca::Rng rng(fmrigcca::derive_seed(seed, {0x7e57}));
  std::normal_distribution<double> d;
  DenseMatrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = d(rng);
  return m;
}

inline DenseMatrix uniform01(Index rows, Index cols, std::uint64_t seed) {
  fmrigcca::Rng rng(fmrigcca::derive_seed(seed, {0x0a11}));
  std::uniform_real_distribution<double> d(0.0, 1.0);
  DenseMatrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = d(rng);
  return m;
}

inline DenseMatrix orthonormal(Index rows, Index cols, std::uint64_t seed) {
  Eigen::HouseholderQR<DenseMatrix> qr(gaussian(rows, cols, seed));
  return qr.householderQ() * DenseMatrix::Identity(rows, cols);
}

// Orthonormal basis of the column space, computed with Jacobi SVD (independent of the library path).
inline DenseMatrix orth(const DenseMatrix& x) {
  Eigen::JacobiSVD<DenseMatrix> svd(x, Eigen::ComputeThinU);
  Index r = 0;
  while (r < svd.singularValues().size() && svd.singularValues()(r) > 1e-10 * svd.singularValues()(0)) ++r;
  return svd.matrixU().leftCols(r);
}

// ||P1 - P2||_2 from explicitly formed projectors; only for small row counts.
inline double projector_gap(const DenseMatrix& b1, const DenseMatrix& b2) {
  const DenseMatrix d = b1 * b1.transpose() - b2 * b2.transpose();
  Eigen::JacobiSVD<DenseMatrix> svd(d);
  return svd.singularValues()(0);
}

// X_k = W Z_k^T with a shared N x R basis and subject-specific full-rank Z_k.
struct Planted {
  DenseMatrix w;
  std::vector<DenseMatrix> views;
};

inline Planted planted(Index n, Index m, std::size_t k, Index r, std::uint64_t seed) {
  Planted p;
  p.w = gaussian(n, r, seed);
  for (std::size_t i = 0; i < k; ++i) p.views.push_back(p.w * gaussian(m, r, seed + 1000 + i).transpose());
  return p;
}

// Common rank-r block plus a subject-specific block filling the remaining m - r columns.
inline Planted planted_with_individual(Index n, Index m, std::size_t k, Index r, std::uint64_t seed) {
  Planted p;
  p.w = gaussian(n, r, seed);
  for (std::size_t i = 0; i < k; ++i) {
    DenseMatrix basis(n, m);
    basis << p.w, gaussian(n, m - r, seed + 2000 + i);
    p.views.push_back(basis * gaussian(m, m, seed + 3000 + i).transpose());
  }
  return p;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("fmrigcca_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testutil
