#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fmrigcca {

/// Real dense matrix. Rows are voxels and columns are time points for subject data.
using DenseMatrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// The K subject views X_k, each n_voxels x n_timepoints.
///
/// Construction validates that there are at least two subjects of identical shape;
/// an instance is therefore always usable by the solvers.
class MultiSubjectDataset {
 public:
  explicit MultiSubjectDataset(std::vector<DenseMatrix> subjects,
                               std::vector<std::string> labels = {});

  Index n_voxels() const noexcept { return n_voxels_; }
  Index n_timepoints() const noexcept { return n_timepoints_; }
  std::size_t n_subjects() const noexcept { return subjects_.size(); }

  const DenseMatrix& subject(std::size_t k) const { return subjects_.at(k); }
  std::span<const DenseMatrix> subjects() const noexcept { return subjects_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  /// Subset in the given order; labels follow their subjects.
  MultiSubjectDataset select(std::span<const std::size_t> indices) const;

 private:
  std::vector<DenseMatrix> subjects_;
  std::vector<std::string> labels_;
  Index n_voxels_ = 0;
  Index n_timepoints_ = 0;
};

/// Sum of squared Frobenius norms of every view.
double total_energy(std::span<const DenseMatrix> views);

}  // namespace fmrigcca
