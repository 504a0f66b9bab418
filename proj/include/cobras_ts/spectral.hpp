#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cobras_ts/distance.hpp"

namespace cobras::spectral {

struct SpectralParams {
  std::size_t k = 2;
  double eig_tolerance = 1e-10;
  std::size_t kmeans_restarts = 10;
  std::uint64_t rng_seed = 0;
};

/// Row-normalized spectral embedding (top-k eigenvectors of D^-1/2 A D^-1/2) of the
/// affinity sub-matrix selected by `subset`. Zero rows become the first basis vector.
std::vector<std::vector<double>> spectral_embedding(const AffinityMatrix& affinity,
                                                    std::span<const std::size_t> subset, std::size_t k);

struct KMeansResult {
  std::vector<std::size_t> assignment;
  double inertia = 0.0;
};

/// Lloyd's k-means with k-means++ seeding, best of `restarts` by inertia. Every cluster
/// is non-empty on return (empty ones take the point farthest from its own center).
KMeansResult kmeans(const std::vector<std::vector<double>>& points, std::size_t k, std::size_t restarts,
                    std::uint64_t rng_seed);

/// Ng-Jordan-Weiss spectral clustering on affinity(subset, subset). Returns one cluster
/// index in [0, k) per subset position; all k clusters are non-empty.
std::vector<std::size_t> spectral_cluster(const AffinityMatrix& affinity, std::span<const std::size_t> subset,
                                          const SpectralParams& params);

}  // namespace cobras::spectral
