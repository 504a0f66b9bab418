#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "cobras_ts/eval.hpp"
#include "cobras_ts/spectral.hpp"

using namespace cobras;
using namespace cobras::spectral;

namespace {

// Distances 0..0.2 inside a block, ~20 across; with gamma 0.5 the affinities are ~1 and ~e^-10.
DistanceMatrix block_distances(const std::vector<std::size_t>& block_of, std::uint64_t seed) {
  const std::size_t n = block_of.size();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(0.0, 0.2);
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) d[i * n + j] = d[j * n + i] = (block_of[i] == block_of[j] ? 0 : 20) + jitter(rng);
  return DistanceMatrix(n, d);
}

// Normalized cut of the 2-partition encoded by `mask` (bit i set = side 1).
double ncut(const AffinityMatrix& a, unsigned mask) {
  const std::size_t n = a.size();
  double cut = 0, vol0 = 0, vol1 = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const bool si = mask >> i & 1u, sj = mask >> j & 1u;
      (si ? vol1 : vol0) += a(i, j);
      if (si != sj) cut += a(i, j);
    }
  return cut / 2 / vol0 + cut / 2 / vol1;
}

}  // namespace

TEST(Spectral, BlocksAreRecoveredAndMinimizeTheCut) {
  const std::vector<std::size_t> blocks{0, 1, 0, 0, 1, 1, 0, 1, 1};
  const auto a = to_affinity(block_distances(blocks, 1), 0.5);
  std::vector<std::size_t> subset(blocks.size());
  std::iota(subset.begin(), subset.end(), 0);

  // Brute force: the block partition has the smallest normalized cut of all 2-partitions.
  unsigned block_mask = 0;
  for (std::size_t i = 0; i < blocks.size(); ++i) block_mask |= static_cast<unsigned>(blocks[i]) << i;
  const unsigned full = (1u << blocks.size()) - 1;
  double best = std::numeric_limits<double>::infinity();
  unsigned arg = 0;
  for (unsigned mask = 1; mask < full; ++mask) {
    const double c = ncut(a, mask);
    if (c < best) {
      best = c;
      arg = mask;
    }
  }
  EXPECT_TRUE(arg == block_mask || arg == (full ^ block_mask));

  const auto assignment = spectral_cluster(a, subset, {2, 1e-10, 10, 4});
  EXPECT_EQ(eval::ari(blocks, assignment), 1.0);
}

TEST(Spectral, SubsetSizeEqualToK) {
  const auto a = to_affinity(block_distances({0, 0, 1, 1, 2}, 2), 0.5);
  const std::vector<std::size_t> subset{4, 1, 2};
  auto assignment = spectral_cluster(a, subset, {3, 1e-10, 10, 0});
  std::sort(assignment.begin(), assignment.end());
  EXPECT_EQ(assignment, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_THROW(spectral_cluster(a, subset, {4, 1e-10, 10, 0}), PreconditionError);
}

TEST(Spectral, DeterministicAndNonEmpty) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  const std::size_t n = 25;
  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) d[i * n + j] = d[j * n + i] = u(rng);
  const auto a = to_affinity(DistanceMatrix(n, d), 0.5);
  std::vector<std::size_t> subset(n);
  std::iota(subset.begin(), subset.end(), 0);
  for (std::size_t k = 2; k <= 6; ++k) {
    const auto x = spectral_cluster(a, subset, {k, 1e-10, 10, 9});
    const auto y = spectral_cluster(a, subset, {k, 1e-10, 10, 9});
    EXPECT_EQ(x, y);
    std::vector<int> count(k, 0);
    for (auto c : x) ++count.at(c);
    for (int c : count) EXPECT_GT(c, 0);
  }
}

TEST(Spectral, PermutationOnlyRelabels) {
  const std::vector<std::size_t> blocks{0, 0, 1, 2, 1, 2, 0, 1, 2, 2};
  const auto a = to_affinity(block_distances(blocks, 5), 0.5);
  std::vector<std::size_t> subset(blocks.size());
  std::iota(subset.begin(), subset.end(), 0);
  const auto base = spectral_cluster(a, subset, {3, 1e-10, 10, 1});

  std::vector<std::size_t> perm(subset);
  std::mt19937_64 rng(2);
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto permuted = spectral_cluster(a, perm, {3, 1e-10, 10, 1});
  std::vector<std::size_t> back(blocks.size());
  for (std::size_t p = 0; p < perm.size(); ++p) back[perm[p]] = permuted[p];
  EXPECT_EQ(eval::ari(base, back), 1.0);
  EXPECT_EQ(eval::ari(blocks, base), 1.0);
}

TEST(Spectral, EmbeddingRowsHaveUnitNorm) {
  const auto a = to_affinity(block_distances({0, 1, 1, 0, 2, 2, 1}, 7), 0.5);
  const std::vector<std::size_t> subset{0, 1, 2, 3, 4, 5, 6};
  for (const auto& row : spectral_embedding(a, subset, 3)) {
    double s = 0;
    for (double v : row) s += v * v;
    EXPECT_NEAR(std::sqrt(s), 1.0, 1e-9);
  }
}

TEST(KMeans, SeparatedPointsAndRepair) {
  std::vector<std::vector<double>> pts{{0, 0}, {0.1, 0}, {0, 0.1}, {5, 5}, {5.1, 5}, {5, 5.1}};
  const auto r = kmeans(pts, 2, 5, 0);
  EXPECT_EQ(eval::ari(std::vector<std::size_t>{0, 0, 0, 1, 1, 1}, r.assignment), 1.0);
  EXPECT_NEAR(r.inertia, 24.0 / 900.0, 1e-12);

  // All points identical: still k non-empty clusters.
  std::vector<std::vector<double>> same(5, std::vector<double>{1.0, 1.0});
  const auto s = kmeans(same, 3, 3, 1);
  std::vector<int> count(3, 0);
  for (auto c : s.assignment) ++count.at(c);
  for (int c : count) EXPECT_GT(c, 0);
}
