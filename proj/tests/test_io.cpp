#include "fmrigcca/error.hpp"
#include "fmrigcca/io.hpp"
#include "support.hpp"

#include <doctest.h>

#include <Eigen/SVD>

#include <cstring>
#include <limits>

using namespace fmrigcca;

namespace {

std::string header(std::uint64_t rows, std::uint64_t cols, std::uint32_t version = 1) {
  std::string out = "GCM1";
  auto put = [&](std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  put(version, 4);
  put(rows, 8);
  put(cols, 8);
  return out;
}

std::string le_double(double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  std::string out;
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  return out;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("csv text reads row by row") {
  const DenseMatrix m = io::decode_csv("1,2\n3,4");
  REQUIRE(m.rows() == 2);
  REQUIRE(m.cols() == 2);
  CHECK(m(0, 0) == 1.0);
  CHECK(m(0, 1) == 2.0);
  CHECK(m(1, 0) == 3.0);
  CHECK(m(1, 1) == 4.0);
}

TEST_CASE("binary header with a zero payload") {
  std::string bytes = header(3, 1);
  for (int i = 0; i < 3; ++i) bytes += le_double(0.0);
  const DenseMatrix m = io::decode_binary(bytes);
  CHECK(m.rows() == 3);
  CHECK(m.cols() == 1);
  CHECK(m.isZero(0.0));
}

TEST_CASE("binary layout is little-endian and row-major") {
  DenseMatrix m(2, 2);
  m << 1.0, 2.0, 3.0, 4.0;
  const std::string expected = header(2, 2) + le_double(1.0) + le_double(2.0) + le_double(3.0) + le_double(4.0);
  CHECK(io::encode_binary(m) == expected);
}

TEST_CASE("non-finite values are rejected") {
  CHECK_THROWS_AS(io::decode_csv("1,nan\n3,4"), NonFiniteError);
  CHECK_THROWS_AS(io::decode_csv("inf"), NonFiniteError);
  const std::string bytes = header(1, 1) + le_double(std::numeric_limits<double>::quiet_NaN());
  CHECK_THROWS_AS(io::decode_binary(bytes), NonFiniteError);
}

TEST_CASE("malformed headers and dimension mismatches are distinct errors") {
  CHECK_THROWS_AS(io::decode_binary("GCM"), FormatError);
  std::string bad_magic = header(1, 1) + le_double(1.0);
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(io::decode_binary(bad_magic), FormatError);
  CHECK_THROWS_AS(io::decode_binary(header(1, 1, 2) + le_double(1.0)), FormatError);
  CHECK_THROWS_AS(io::decode_binary(header(2, 2) + le_double(1.0)), DimensionMismatchError);
  CHECK_THROWS_AS(io::decode_binary(header(1, 1) + le_double(1.0) + le_double(2.0)), DimensionMismatchError);
  CHECK_THROWS_AS(io::decode_csv("1,2\n3"), DimensionMismatchError);
  CHECK_THROWS_AS(io::decode_csv("1,x"), FormatError);
  CHECK_THROWS_AS(io::decode_csv(""), FormatError);
}

TEST_CASE("binary round trip is bit exact") {
  const auto dir = testutil::scratch_dir("io_bin");
  const DenseMatrix m = testutil::gaussian(100, 7, 11);
  io::save_matrix(m, dir / "m.gcm");
  const DenseMatrix back = io::load_matrix(dir / "m.gcm");
  REQUIRE(back.rows() == 100);
  REQUIRE(back.cols() == 7);
  CHECK(std::memcmp(back.data(), m.data(), sizeof(double) * 700) == 0);
}

TEST_CASE("csv round trip") {
  const auto dir = testutil::scratch_dir("io_csv");
  const DenseMatrix m = testutil::gaussian(13, 5, 12) * 1e3;
  io::save_matrix(m, dir / "m.csv");
  const DenseMatrix back = io::load_matrix(dir / "m.csv");
  REQUIRE(back.rows() == 13);
  CHECK((back - m).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("unwritable and missing paths raise I/O errors") {
  const DenseMatrix m = DenseMatrix::Ones(2, 2);
  CHECK_THROWS_AS(io::save_matrix(m, "/nonexistent-dir/sub/m.gcm"), IoError);
  CHECK_THROWS_AS(io::load_matrix("/nonexistent-dir/m.gcm"), IoError);
}

TEST_CASE("dropping initial volumes") {
  const DenseMatrix x = testutil::gaussian(4, 80, 3);
  const DenseMatrix y = io::drop_initial_volumes(x, 5);
  CHECK(y.rows() == 4);
  CHECK(y.cols() == 75);
  CHECK(y == x.rightCols(75));
  CHECK(io::drop_initial_volumes(x, 0) == x);
  CHECK_THROWS_AS(io::drop_initial_volumes(testutil::gaussian(4, 3, 1), 3), ValidationError);
}

TEST_CASE("constant and ramp rows de-drift to zero") {
  DenseMatrix x(2, 4);
  x << 2, 2, 2, 2, 0, 1, 2, 3;
  CHECK(io::center_dedrift(x).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("quadratic de-drift matches the normal equations") {
  const int m = 10;
  DenseMatrix x(1, m);
  for (int t = 0; t < m; ++t) x(0, t) = 5.0 * t * t;
  // [1 t]^T [1 t] b = [1 t]^T y, solved by the explicit 2x2 inverse.
  double s0 = m, s1 = 0, s2 = 0, y0 = 0, y1 = 0;
  for (int t = 0; t < m; ++t) {
    s1 += t;
    s2 += double(t) * t;
    y0 += x(0, t);
    y1 += t * x(0, t);
  }
  const double det = s0 * s2 - s1 * s1;
  const double b0 = (s2 * y0 - s1 * y1) / det;
  const double b1 = (s0 * y1 - s1 * y0) / det;
  const DenseMatrix r = io::center_dedrift(x);
  for (int t = 0; t < m; ++t) CHECK(std::abs(r(0, t) - (x(0, t) - b0 - b1 * t)) < 1e-9);
}

TEST_CASE("de-drifted rows are orthogonal to constant and ramp") {
  const DenseMatrix x = testutil::gaussian(50, 30, 5) * 7.0 + DenseMatrix::Constant(50, 30, 3.0);
  const DenseMatrix r = io::center_dedrift(x);
  Vector ramp(30);
  for (int t = 0; t < 30; ++t) ramp(t) = t;
  for (Index i = 0; i < r.rows(); ++i) {
    const double scale = x.row(i).norm() * ramp.norm();
    CHECK(std::abs(r.row(i).sum()) < 1e-10 * x.row(i).norm() * std::sqrt(30.0));
    CHECK(std::abs(r.row(i).dot(ramp)) < 1e-10 * scale);
  }
  Eigen::JacobiSVD<DenseMatrix> svd(r);
  const auto& s = svd.singularValues();
  Index rank = 0;
  while (rank < s.size() && s(rank) > 1e-10 * s(0)) ++rank;
  CHECK(rank == 28);
}

TEST_CASE("de-drift needs three columns") {
  CHECK_THROWS_AS(io::center_dedrift(DenseMatrix(DenseMatrix::Ones(3, 2))), ValidationError);
}

TEST_CASE("series and matrix de-drift agree") {
  const DenseMatrix x = testutil::gaussian(1, 12, 9);
  const Vector v = x.row(0).transpose();
  CHECK((io::center_dedrift(v).transpose() - io::center_dedrift(x).row(0)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("preprocess drops first then de-drifts") {
  std::vector<DenseMatrix> views = {testutil::gaussian(6, 20, 1), testutil::gaussian(6, 20, 2)};
  const MultiSubjectDataset data(views);
  const auto out = io::preprocess(data, 5, true);
  CHECK(out.n_timepoints() == 15);
  for (std::size_t k = 0; k < 2; ++k)
    CHECK((out.subject(k) - io::center_dedrift(io::drop_initial_volumes(views[k], 5))).cwiseAbs().maxCoeff() ==
          0.0);
}

TEST_CASE("dataset shape validation") {
  CHECK_THROWS_AS(MultiSubjectDataset({testutil::gaussian(3, 3, 1)}), ValidationError);
  CHECK_THROWS_AS(MultiSubjectDataset({testutil::gaussian(3, 3, 1), testutil::gaussian(3, 4, 1)}), ValidationError);
}

}
