#pragma once

#include "fmrigcca/types.hpp"

#include <span>
#include <string>
#include <vector>

namespace fmrigcca::eval {

struct BetaMap {
  Vector values;
  Vector regressor;
};

/// Per-voxel single-regressor GLM on de-drifted series: beta_v = <x_v, r~> / ||r~||^2 where r~
/// is the regressor with its constant and linear-trend components removed. Equal to the
/// regressor coefficient of an ordinary least-squares fit on [1, t, r].
BetaMap glm_beta(const DenseMatrix& x, const Vector& regressor);

/// Entrywise mean of equally long maps.
BetaMap average_beta_map(std::span<const BetaMap> maps);

struct VoxelMask {
  std::vector<Index> selected;  // ascending
  double fraction = 0.0;
  Index n_voxels = 0;
};

/// The ceil(fraction * N) largest values; ties at the cutoff go to the lower index.
VoxelMask top_fraction_mask(const Vector& values, double fraction);

/// |intersection of all masks| / |mask| * 100.
double overlap_percentage(std::span<const VoxelMask> masks);

/// Newline-delimited voxel indices.
std::string mask_text(const VoxelMask& mask);

}  // namespace fmrigcca::eval
