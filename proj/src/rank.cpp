#include "fmrigcca/rank.hpp"

#include "fmrigcca/error.hpp"
#include "fmrigcca/linalg.hpp"
#include "fmrigcca/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

namespace fmrigcca::rank {

namespace {

void check_ranks(const std::vector<Index>& ranks, const char* what) {
  if (ranks.empty()) throw ValidationError(std::string(what) + ": no ranks requested");
  for (Index r : ranks)
    if (r < 1) throw ValidationError(std::string(what) + ": ranks must be >= 1, got " + std::to_string(r));
}

Index max_rank(const std::vector<Index>& ranks) { return *std::max_element(ranks.begin(), ranks.end()); }

std::vector<double> gaps_between(const DenseMatrix& b1, const DenseMatrix& b2, const std::vector<Index>& ranks) {
  std::vector<double> out;
  out.reserve(ranks.size());
  for (Index r : ranks) out.push_back(gcca::subspace_gap(b1.leftCols(r), b2.leftCols(r)));
  return out;
}

void check_partition(const Partition& split, std::size_t k) {
  if (split.first.size() < 2 || split.second.size() < 2)
    throw ValidationError("each half of a partition needs at least two subjects");
  for (std::size_t i : split.first)
    if (i >= k) throw ValidationError("partition index out of range");
  for (std::size_t i : split.second)
    if (i >= k) throw ValidationError("partition index out of range");
}

GapProfile aggregate(std::vector<Index> ranks, std::vector<std::vector<double>> gaps, std::uint64_t seed,
                     ProfileKind kind) {
  GapProfile p;
  p.ranks = std::move(ranks);
  p.gaps = std::move(gaps);
  p.n_partitions = static_cast<int>(p.gaps.size());
  p.seed = seed;
  p.kind = kind;
  const double n = static_cast<double>(p.gaps.size());
  for (std::size_t i = 0; i < p.ranks.size(); ++i) {
    double mean = 0.0;
    for (const auto& row : p.gaps) mean += row[i];
    mean /= n;
    double var = 0.0;
    for (const auto& row : p.gaps) var += (row[i] - mean) * (row[i] - mean);
    p.mean_gap.push_back(mean);
    p.std_gap.push_back(p.gaps.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0);
  }
  return p;
}

std::uint64_t partition_seed(std::uint64_t seed, int p) { return derive_seed(seed, {static_cast<std::uint64_t>(p)}); }

}  // namespace

Partition partition_subjects(std::size_t k, std::uint64_t seed) {
  if (k < 4) throw ValidationError("partition_subjects: need K >= 4 so that each half has two subjects");
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  // Fisher-Yates.
  for (std::size_t i = k - 1; i > 0; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i);
    std::swap(order[i], order[pick(rng)]);
  }
  Partition out;
  out.first.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k / 2));
  out.second.assign(order.begin() + static_cast<std::ptrdiff_t>(k / 2), order.end());
  std::sort(out.first.begin(), out.first.end());
  std::sort(out.second.begin(), out.second.end());
  return out;
}

std::vector<double> spatial_gaps(const MultiSubjectDataset& data, const Partition& split,
                                 const std::vector<Index>& ranks, double rel_tol) {
  check_ranks(ranks, "spatial gap profile");
  check_partition(split, data.n_subjects());
  const Index top = max_rank(ranks);
  const auto s1 = gcca::maxvar(data.select(split.first), top, rel_tol);
  const auto s2 = gcca::maxvar(data.select(split.second), top, rel_tol);
  return gaps_between(s1.basis, s2.basis, ranks);
}

std::vector<double> temporal_gaps(const MultiSubjectDataset& data, const Partition& split, Index spatial_rank,
                                  const std::vector<Index>& temporal_ranks, double rel_tol) {
  check_ranks(temporal_ranks, "temporal gap profile");
  check_partition(split, data.n_subjects());
  const Index top = max_rank(temporal_ranks);
  if (top > spatial_rank)
    throw ValidationError("temporal ranks must not exceed the spatial rank " + std::to_string(spatial_rank));
  auto temporal_basis = [&](const std::vector<std::size_t>& half) {
    const auto stage1 = gcca::maxvar(data.select(half), spatial_rank, rel_tol);
    return gcca::maxvar_direct(stage1.loadings, top, rel_tol).basis;
  };
  return gaps_between(temporal_basis(split.first), temporal_basis(split.second), temporal_ranks);
}

GapProfile spatial_gap_profile(const MultiSubjectDataset& data, const std::vector<Index>& ranks, int n_partitions,
                               std::uint64_t seed, double rel_tol, unsigned threads) {
  if (n_partitions < 1) throw ValidationError("spatial gap profile: n_partitions must be >= 1");
  check_ranks(ranks, "spatial gap profile");
  std::vector<std::vector<double>> gaps(static_cast<std::size_t>(n_partitions));
  linalg::parallel_for(gaps.size(), threads, [&](std::size_t p) {
    const auto split = partition_subjects(data.n_subjects(), partition_seed(seed, static_cast<int>(p)));
    gaps[p] = spatial_gaps(data, split, ranks, rel_tol);
  });
  return aggregate(ranks, std::move(gaps), seed, ProfileKind::spatial);
}

GapProfile temporal_gap_profile(const MultiSubjectDataset& data, Index spatial_rank,
                                const std::vector<Index>& temporal_ranks, int n_partitions, std::uint64_t seed,
                                double rel_tol, unsigned threads) {
  if (n_partitions < 1) throw ValidationError("temporal gap profile: n_partitions must be >= 1");
  check_ranks(temporal_ranks, "temporal gap profile");
  std::vector<std::vector<double>> gaps(static_cast<std::size_t>(n_partitions));
  linalg::parallel_for(gaps.size(), threads, [&](std::size_t p) {
    const auto split = partition_subjects(data.n_subjects(), partition_seed(seed, static_cast<int>(p)));
    gaps[p] = temporal_gaps(data, split, spatial_rank, temporal_ranks, rel_tol);
  });
  return aggregate(temporal_ranks, std::move(gaps), seed, ProfileKind::temporal);
}

Index select_rank(const GapProfile& profile, double threshold) {
  if (profile.ranks.empty() || profile.ranks.size() != profile.mean_gap.size())
    throw ValidationError("select_rank: empty or inconsistent profile");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ValidationError("select_rank: threshold must lie in (0, 1)");
  Index best = 0;
  for (std::size_t i = 0; i < profile.ranks.size(); ++i)
    if (profile.mean_gap[i] <= threshold) best = std::max(best, profile.ranks[i]);
  return best;
}

std::string profile_csv(const GapProfile& profile) {
  std::string out = "rank,mean_gap,std_gap\n";
  char buf[32];
  auto put = [&](double v) {
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, end);
  };
  for (std::size_t i = 0; i < profile.ranks.size(); ++i) {
    out += std::to_string(profile.ranks[i]);
    out += ',';
    put(profile.mean_gap[i]);
    out += ',';
    put(profile.std_gap[i]);
    out += '\n';
  }
  return out;
}

}  // namespace fmrigcca::rank
