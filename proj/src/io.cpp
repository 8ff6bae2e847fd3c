#include "fmrigcca/io.hpp"

#include "fmrigcca/error.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace fmrigcca {

MultiSubjectDataset::MultiSubjectDataset(std::vector<DenseMatrix> subjects,
                                         std::vector<std::string> labels)
    : subjects_(std::move(subjects)), labels_(std::move(labels)) {
  if (subjects_.size() < 2) throw ValidationError("dataset needs at least two subjects");
  n_voxels_ = subjects_.front().rows();
  n_timepoints_ = subjects_.front().cols();
  if (n_voxels_ == 0 || n_timepoints_ == 0) throw ValidationError("dataset has empty subjects");
  for (std::size_t k = 0; k < subjects_.size(); ++k) {
    if (subjects_[k].rows() != n_voxels_ || subjects_[k].cols() != n_timepoints_)
      throw ValidationError("subject " + std::to_string(k) + " is " +
                            std::to_string(subjects_[k].rows()) + "x" +
                            std::to_string(subjects_[k].cols()) + ", expected " +
                            std::to_string(n_voxels_) + "x" + std::to_string(n_timepoints_));
  }
  if (!labels_.empty() && labels_.size() != subjects_.size())
    throw ValidationError("label count does not match subject count");
}

MultiSubjectDataset MultiSubjectDataset::select(std::span<const std::size_t> indices) const {
  std::vector<DenseMatrix> subset;
  std::vector<std::string> subset_labels;
  subset.reserve(indices.size());
  for (std::size_t i : indices) {
    subset.push_back(subject(i));
    if (!labels_.empty()) subset_labels.push_back(labels_[i]);
  }
  return MultiSubjectDataset(std::move(subset), std::move(subset_labels));
}

double total_energy(std::span<const DenseMatrix> views) {
  double e = 0.0;
  for (const auto& v : views) e += v.squaredNorm();
  return e;
}

}  // namespace fmrigcca

namespace fmrigcca::io {

namespace {

constexpr std::array<char, 4> kMagic = {'G', 'C', 'M', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 4 + 4 + 8 + 8;

template <typename U>
void put_le(std::string& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

template <typename U>
U get_le(const char* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i)
    v |= static_cast<U>(static_cast<unsigned char>(p[i])) << (8 * i);
  return v;
}

void require_finite(const DenseMatrix& m, const std::string& where) {
  if (!m.allFinite()) throw NonFiniteError(where + ": matrix contains non-finite values");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failure on " + path.string());
  return std::move(ss).str();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

MatrixFormat format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? MatrixFormat::csv : MatrixFormat::binary;
}

std::string encode_binary(const DenseMatrix& m) {
  std::string out;
  out.reserve(kHeaderBytes + static_cast<std::size_t>(m.size()) * 8);
  out.append(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(out, kVersion);
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(m(i, j)));
  return out;
}

DenseMatrix decode_binary(std::string_view bytes) {
  if (bytes.size() < kHeaderBytes) throw FormatError("binary matrix: truncated header");
  if (std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0)
    throw FormatError("binary matrix: bad magic");
  const auto version = get_le<std::uint32_t>(bytes.data() + 4);
  if (version != kVersion) throw FormatError("binary matrix: unsupported version " + std::to_string(version));
  const auto rows = get_le<std::uint64_t>(bytes.data() + 8);
  const auto cols = get_le<std::uint64_t>(bytes.data() + 16);
  constexpr auto kMaxEntries = std::numeric_limits<std::uint64_t>::max() / 8;
  if (cols != 0 && rows > kMaxEntries / cols) throw FormatError("binary matrix: dimensions overflow");
  const std::uint64_t payload = rows * cols * 8;
  if (bytes.size() - kHeaderBytes != payload)
    throw DimensionMismatchError("binary matrix: header declares " + std::to_string(rows) + "x" +
                                 std::to_string(cols) + " but payload has " +
                                 std::to_string(bytes.size() - kHeaderBytes) + " bytes");
  DenseMatrix m(static_cast<Index>(rows), static_cast<Index>(cols));
  const char* p = bytes.data() + kHeaderBytes;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j, p += 8) m(i, j) = std::bit_cast<double>(get_le<std::uint64_t>(p));
  require_finite(m, "binary matrix");
  return m;
}

std::string encode_csv(const DenseMatrix& m) {
  std::string out;
  std::array<char, 32> buf{};
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out.push_back(',');
      auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), m(i, j));
      out.append(buf.data(), end);
    }
    out.push_back('\n');
  }
  return out;
}

DenseMatrix decode_csv(std::string_view text) {
  std::vector<double> values;
  Index cols = -1;
  Index rows = 0;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (trim(line).empty()) continue;
    Index count = 0;
    while (true) {
      const auto comma = line.find(',');
      const std::string_view token = trim(line.substr(0, comma));
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
      if (token.empty() || ec != std::errc{} || ptr != token.data() + token.size())
        throw FormatError("csv line " + std::to_string(line_no) + ": cannot parse '" + std::string(token) + "'");
      if (!std::isfinite(v))
        throw NonFiniteError("csv line " + std::to_string(line_no) + ": non-finite value");
      values.push_back(v);
      ++count;
      if (comma == std::string_view::npos) break;
      line.remove_prefix(comma + 1);
    }
    if (cols < 0) cols = count;
    if (count != cols)
      throw DimensionMismatchError("csv line " + std::to_string(line_no) + " has " + std::to_string(count) +
                                   " fields, expected " + std::to_string(cols));
    ++rows;
  }
  if (rows == 0) throw FormatError("csv matrix: no data rows");
  DenseMatrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = values[static_cast<std::size_t>(i * cols + j)];
  return m;
}

DenseMatrix load_matrix(const std::filesystem::path& path, MatrixFormat format) {
  const std::string bytes = read_file(path);
  return format == MatrixFormat::binary ? decode_binary(bytes) : decode_csv(bytes);
}

void save_matrix(const DenseMatrix& m, const std::filesystem::path& path, MatrixFormat format) {
  const std::string bytes = format == MatrixFormat::binary ? encode_binary(m) : encode_csv(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw IoError("write failure on " + path.string());
}

DenseMatrix drop_initial_volumes(const DenseMatrix& x, Index n) {
  if (n < 0 || n >= x.cols())
    throw ValidationError("drop_initial_volumes: cannot drop " + std::to_string(n) + " of " +
                          std::to_string(x.cols()) + " volumes");
  return x.rightCols(x.cols() - n);
}

namespace {

// Orthonormal basis (M x 2) of span{1, t}.
DenseMatrix drift_basis(Index m) {
  DenseMatrix q(m, 2);
  q.col(0).setConstant(1.0 / std::sqrt(static_cast<double>(m)));
  const double mean_t = 0.5 * static_cast<double>(m - 1);
  for (Index t = 0; t < m; ++t) q(t, 1) = static_cast<double>(t) - mean_t;
  q.col(1).normalize();
  return q;
}

}  // namespace

DenseMatrix center_dedrift(const DenseMatrix& x) {
  if (x.cols() < 3) throw ValidationError("center_dedrift: need at least 3 time points");
  const DenseMatrix q = drift_basis(x.cols());
  DenseMatrix out = x - (x * q) * q.transpose();
  require_finite(out, "center_dedrift");
  return out;
}

Vector center_dedrift(const Vector& series) {
  DenseMatrix row = series.transpose();
  return center_dedrift(row).transpose();
}

MultiSubjectDataset preprocess(const MultiSubjectDataset& data, Index drop_volumes, bool dedrift) {
  std::vector<DenseMatrix> out;
  out.reserve(data.n_subjects());
  for (const auto& x : data.subjects()) {
    DenseMatrix y = drop_volumes > 0 ? drop_initial_volumes(x, drop_volumes) : x;
    if (dedrift) y = center_dedrift(y);
    out.push_back(std::move(y));
  }
  return MultiSubjectDataset(std::move(out), data.labels());
}

}  // namespace fmrigcca::io
