#pragma once

#include "fmrigcca/gcca.hpp"
#include "fmrigcca/types.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace fmrigcca::rank {

enum class ProfileKind { spatial, temporal };

/// Split-half subspace gaps as a function of the hypothesized dimension.
struct GapProfile {
  std::vector<Index> ranks;
  std::vector<double> mean_gap;
  std::vector<double> std_gap;
  /// gaps[p][i]: gap for partition p at ranks[i].
  std::vector<std::vector<double>> gaps;
  int n_partitions = 0;
  std::uint64_t seed = 0;
  ProfileKind kind = ProfileKind::spatial;
};

struct Partition {
  std::vector<std::size_t> first;
  std::vector<std::size_t> second;
};

/// Uniform random split of {0..K-1} into sorted halves of sizes floor(K/2) and ceil(K/2).
Partition partition_subjects(std::size_t k, std::uint64_t seed);

/// Gaps between the MAX-VAR bases of the two halves of one fixed split.
std::vector<double> spatial_gaps(const MultiSubjectDataset& data, const Partition& split,
                                 const std::vector<Index>& ranks, double rel_tol = gcca::kDefaultRelTol);

/// Stage one at `spatial_rank` on each half, then rank-r MAX-VAR over each half's loadings.
std::vector<double> temporal_gaps(const MultiSubjectDataset& data, const Partition& split, Index spatial_rank,
                                  const std::vector<Index>& temporal_ranks, double rel_tol = gcca::kDefaultRelTol);

/// Profiles over n_partitions random splits; partition p uses partition_subjects(K, derive(seed, p)).
GapProfile spatial_gap_profile(const MultiSubjectDataset& data, const std::vector<Index>& ranks, int n_partitions,
                               std::uint64_t seed, double rel_tol = gcca::kDefaultRelTol, unsigned threads = 1);

GapProfile temporal_gap_profile(const MultiSubjectDataset& data, Index spatial_rank,
                                const std::vector<Index>& temporal_ranks, int n_partitions, std::uint64_t seed,
                                double rel_tol = gcca::kDefaultRelTol, unsigned threads = 1);

/// Largest hypothesized rank whose mean gap is <= threshold, or 0 when none is.
Index select_rank(const GapProfile& profile, double threshold = 0.9);

/// "rank,mean_gap,std_gap" table.
std::string profile_csv(const GapProfile& profile);

}  // namespace fmrigcca::rank
