#pragma once

#include "fmrigcca/types.hpp"

#include <filesystem>
#include <string_view>

namespace fmrigcca::io {

/// On-disk matrix encodings.
///
/// binary: "GCM1" magic, u32 version (= 1), u64 rows, u64 cols, then rows*cols IEEE-754
///         binary64 values in row-major order; every field little-endian.
/// csv:    one matrix row per line, ',' delimiter, '.' decimal separator, no header.
enum class MatrixFormat { binary, csv };

/// Picks the format from the extension: ".csv" is csv, anything else binary.
MatrixFormat format_for_path(const std::filesystem::path& path);

DenseMatrix load_matrix(const std::filesystem::path& path, MatrixFormat format);
inline DenseMatrix load_matrix(const std::filesystem::path& path) {
  return load_matrix(path, format_for_path(path));
}

/// Binary output round-trips bit-exactly; csv writes shortest round-trip decimal text.
void save_matrix(const DenseMatrix& m, const std::filesystem::path& path, MatrixFormat format);
inline void save_matrix(const DenseMatrix& m, const std::filesystem::path& path) {
  save_matrix(m, path, format_for_path(path));
}

/// In-memory codecs behind the file functions.
std::string encode_binary(const DenseMatrix& m);
DenseMatrix decode_binary(std::string_view bytes);
std::string encode_csv(const DenseMatrix& m);
DenseMatrix decode_csv(std::string_view text);

/// Removes the first `n` columns (time points).
DenseMatrix drop_initial_volumes(const DenseMatrix& x, Index n);

/// Removes from every row its least-squares fit on the constant and on the 0-based ramp
/// t = 0..M-1. Requires at least three columns.
DenseMatrix center_dedrift(const DenseMatrix& x);

/// The same residualization applied to a single time series.
Vector center_dedrift(const Vector& series);

/// Drop-then-de-drift applied to every subject.
MultiSubjectDataset preprocess(const MultiSubjectDataset& data, Index drop_volumes, bool dedrift);

}  // namespace fmrigcca::io
