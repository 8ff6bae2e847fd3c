#include "fmrigcca/eval.hpp"

#include "fmrigcca/error.hpp"
#include "fmrigcca/io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace fmrigcca::eval {

BetaMap glm_beta(const DenseMatrix& x, const Vector& regressor) {
  if (regressor.size() != x.cols())
    throw ValidationError("glm_beta: regressor length " + std::to_string(regressor.size()) + " does not match " +
                          std::to_string(x.cols()) + " time points");
  const Vector effective = io::center_dedrift(regressor);
  const double energy = effective.squaredNorm();
  if (!(energy > 1e-12 * std::max(1.0, regressor.squaredNorm())))
    throw ValidationError("glm_beta: regressor has no component beyond mean and linear trend");
  return BetaMap{(x * effective) / energy, regressor};
}

BetaMap average_beta_map(std::span<const BetaMap> maps) {
  if (maps.empty()) throw ValidationError("average_beta_map: no maps");
  BetaMap out;
  out.values = Vector::Zero(maps.front().values.size());
  out.regressor = maps.front().regressor;
  for (const auto& m : maps) {
    if (m.values.size() != out.values.size()) throw ValidationError("average_beta_map: maps differ in length");
    out.values += m.values;
  }
  out.values /= static_cast<double>(maps.size());
  return out;
}

VoxelMask top_fraction_mask(const Vector& values, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ValidationError("top_fraction_mask: fraction must lie in (0, 1]");
  const Index n = values.size();
  const double target = fraction * static_cast<double>(n);
  auto count = static_cast<Index>(std::ceil(target));
  // 0.1 * 30 evaluates to 3.0000000000000004.
  if (count > 0 && static_cast<double>(count - 1) >= target - 1e-9 * std::max(1.0, target)) --count;
  count = std::clamp<Index>(count, 0, n);

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index i, Index j) { return values(i) > values(j); });
  VoxelMask mask;
  mask.selected.assign(order.begin(), order.begin() + count);
  std::sort(mask.selected.begin(), mask.selected.end());
  mask.fraction = fraction;
  mask.n_voxels = n;
  return mask;
}

double overlap_percentage(std::span<const VoxelMask> masks) {
  if (masks.size() < 2) throw ValidationError("overlap_percentage: need at least two masks");
  const auto& first = masks.front();
  for (const auto& m : masks)
    if (m.n_voxels != first.n_voxels || m.selected.size() != first.selected.size())
      throw ValidationError("overlap_percentage: masks differ in voxel count or size");
  if (first.selected.empty()) throw ValidationError("overlap_percentage: empty masks");
  std::vector<Index> common = first.selected;
  for (std::size_t i = 1; i < masks.size(); ++i) {
    std::vector<Index> next;
    std::set_intersection(common.begin(), common.end(), masks[i].selected.begin(), masks[i].selected.end(),
                          std::back_inserter(next));
    common = std::move(next);
  }
  return 100.0 * static_cast<double>(common.size()) / static_cast<double>(first.selected.size());
}

std::string mask_text(const VoxelMask& mask) {
  std::string out;
  for (Index i : mask.selected) out += std::to_string(i) + '\n';
  return out;
}

}  // namespace fmrigcca::eval
