#include "cobras_ts/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Eigenvalues>

#include "cobras_ts/error.hpp"

namespace cobras::spectral {

std::vector<std::vector<double>> spectral_embedding(const AffinityMatrix& affinity,
                                                    std::span<const std::size_t> subset, std::size_t k) {
  const auto s = static_cast<Eigen::Index>(subset.size());
  Eigen::MatrixXd a(s, s);
  for (Eigen::Index i = 0; i < s; ++i)
    for (Eigen::Index j = 0; j < s; ++j)
      a(i, j) = affinity(subset[static_cast<std::size_t>(i)], subset[static_cast<std::size_t>(j)]);

  Eigen::VectorXd inv_sqrt_degree = a.rowwise().sum();
  for (Eigen::Index i = 0; i < s; ++i) {
    const double deg = inv_sqrt_degree(i);
    inv_sqrt_degree(i) = deg > 1e-300 ? 1.0 / std::sqrt(deg) : 0.0;
  }
  const Eigen::MatrixXd normalized = inv_sqrt_degree.asDiagonal() * a * inv_sqrt_degree.asDiagonal();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(normalized);
  if (solver.info() != Eigen::Success) throw Error("eigen decomposition failed");
  const auto kk = static_cast<Eigen::Index>(k);
  const Eigen::MatrixXd top = solver.eigenvectors().rightCols(kk);

  std::vector<std::vector<double>> rows(subset.size(), std::vector<double>(k, 0.0));
  for (Eigen::Index i = 0; i < s; ++i) {
    const double n = top.row(i).norm();
    auto& row = rows[static_cast<std::size_t>(i)];
    if (n < 1e-12) {
      row[0] = 1.0;
      continue;
    }
    // Column order from largest eigenvalue down.
    for (Eigen::Index c = 0; c < kk; ++c) row[static_cast<std::size_t>(c)] = top(i, kk - 1 - c) / n;
  }
  return rows;
}

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

KMeansResult lloyd(const std::vector<std::vector<double>>& pts, std::size_t k, std::mt19937_64& rng) {
  const std::size_t n = pts.size();
  const std::size_t dim = pts.front().size();

  // k-means++ seeding
  std::vector<std::vector<double>> centers;
  centers.push_back(pts[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)]);
  std::vector<double> d2(n);
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) best = std::min(best, sq_dist(pts[i], c));
      d2[i] = best;
      total += best;
    }
    std::size_t pick = 0;
    if (total <= 0.0) {
      pick = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
    } else {
      double r = std::uniform_real_distribution<double>(0.0, total)(rng);
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        r -= d2[i];
        if (r <= 0.0 && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    }
    centers.push_back(pts[pick]);
  }

  KMeansResult res;
  res.assignment.assign(n, k);
  for (int iter = 0; iter < 300; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = sq_dist(pts[i], centers[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (res.assignment[i] != best) {
        res.assignment[i] = best;
        changed = true;
      }
    }

    std::vector<std::size_t> counts(k, 0);
    for (auto a : res.assignment) ++counts[a];
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[res.assignment[i]] < 2) continue;
        const double d = sq_dist(pts[i], centers[res.assignment[i]]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      --counts[res.assignment[far]];
      res.assignment[far] = c;
      counts[c] = 1;
      changed = true;
    }

    for (auto& c : centers) std::fill(c.begin(), c.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t d = 0; d < dim; ++d) centers[res.assignment[i]][d] += pts[i][d];
    for (std::size_t c = 0; c < k; ++c)
      for (auto& v : centers[c]) v /= static_cast<double>(counts[c]);

    if (!changed) break;
  }

  res.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) res.inertia += sq_dist(pts[i], centers[res.assignment[i]]);
  return res;
}

}  // namespace

KMeansResult kmeans(const std::vector<std::vector<double>>& points, std::size_t k, std::size_t restarts,
                    std::uint64_t rng_seed) {
  if (k == 0 || k > points.size()) throw PreconditionError("kmeans needs 1 <= k <= number of points");
  std::mt19937_64 rng(rng_seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < std::max<std::size_t>(restarts, 1); ++r) {
    auto res = lloyd(points, k, rng);
    if (res.inertia < best.inertia) best = std::move(res);
  }
  return best;
}

std::vector<std::size_t> spectral_cluster(const AffinityMatrix& affinity, std::span<const std::size_t> subset,
                                          const SpectralParams& params) {
  if (params.k < 1) throw PreconditionError("spectral_cluster needs k >= 1");
  if (params.k > subset.size()) throw PreconditionError("spectral_cluster needs k <= subset size");
  if (params.k == subset.size()) {
    std::vector<std::size_t> out(subset.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = i;
    return out;
  }
  const auto embedding = spectral_embedding(affinity, subset, params.k);
  return kmeans(embedding, params.k, params.kmeans_restarts, params.rng_seed).assignment;
}

}  // namespace cobras::spectral
