#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cobras_ts/timeseries.hpp"

namespace cobras::shape {

struct NccResult {
  double value = 0.0;  ///< in [-1, 1]
  long shift = 0;      ///< y[t + shift] lines up with x[t]
};

/// Maximum coefficient-normalized cross-correlation over linear (zero-padded) shifts
/// in (-m, m), computed through an FFT of length nextpow2(2m - 1).
/// Throws PreconditionError("degenerate series") if either input has zero norm.
NccResult ncc_max(std::span<const double> x, std::span<const double> y);
NccResult ncc_max(const TimeSeries& x, const TimeSeries& y);

/// Shape-based distance 1 - ncc_max(x, y).value, in [0, 2].
double sbd(std::span<const double> x, std::span<const double> y);
double sbd(const TimeSeries& x, const TimeSeries& y);

/// Like sbd, but a zero-norm argument yields 1 (no correlation) instead of throwing.
/// Used inside clustering where flat series after z-normalization are legal members.
double sbd_or_one(std::span<const double> x, std::span<const double> y);

/// `y` moved by `shift` with zero fill: out[t] = y[t + shift].
std::vector<double> shift_series(std::span<const double> y, long shift);

/// Shape extraction: align every member to `reference` (skipped when it is all zero),
/// z-normalize, and return the leading eigenvector of Q S Q (Q = I - 11'/m) found by
/// power iteration. The result has zero mean and unit norm, and its sign is chosen to
/// correlate non-negatively with `reference` (or with the aligned members when the
/// reference is zero). Returns the zero vector when there are no members.
std::vector<double> extract_shape(std::span<const std::span<const double>> members,
                                  std::span<const double> reference);

struct KShapeOptions {
  std::size_t k = 2;
  std::uint64_t rng_seed = 0;
  std::size_t max_iter = 100;
};

struct KShapeResult {
  std::vector<std::size_t> assignment;          ///< instance -> cluster in [0, k)
  std::vector<std::vector<double>> centroids;   ///< one per cluster, zero mean / unit norm
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> objective;                ///< sum of SBD to own centroid, per iteration
};

/// k-Shape over z-normalized series. Initial assignment is a seeded shuffle dealt round
/// robin, so every cluster starts non-empty; clusters that empty out are reseeded with
/// the instance farthest from its own centroid.
KShapeResult kshape(std::span<const TimeSeries> series, const KShapeOptions& options);
KShapeResult kshape(const Dataset& ds, const KShapeOptions& options);

/// Member closest (by SBD) to the shape extracted from all members; ties -> lowest index.
/// `series` must already be z-normalized and is indexed by the member ids.
std::size_t sbd_representative(std::span<const std::size_t> members, std::span<const TimeSeries> series);
/// Convenience overload that z-normalizes the dataset first.
std::size_t sbd_representative(std::span<const std::size_t> members, const Dataset& ds);

}  // namespace cobras::shape
