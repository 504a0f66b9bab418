#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cobras_ts/timeseries.hpp"

namespace cobras {

/// Sakoe-Chiba band width, either a fraction of the series length or unconstrained.
class WarpingWindow {
public:
  static WarpingWindow full() { return WarpingWindow(); }
  static WarpingWindow fraction(double w);
  /// "full" or a number in [0, 1].
  static WarpingWindow parse(std::string_view text);

  bool is_full() const noexcept { return full_; }
  double fraction_value() const noexcept { return fraction_; }

  /// Band radius in samples for series of length m: ceil(w*m), at least 1; m for full.
  std::size_t radius(std::size_t m) const noexcept;

  std::string to_string() const;

private:
  WarpingWindow() = default;
  bool full_ = true;
  double fraction_ = 1.0;
};

/// Constrained DTW: sqrt of the minimal accumulated squared difference over monotone
/// warping paths with |i - j| <= radius.
double cdtw(std::span<const double> x, std::span<const double> y, std::size_t radius);
double cdtw(const TimeSeries& x, const TimeSeries& y, const WarpingWindow& window);

/// Dense symmetric matrix with zero diagonal.
class DistanceMatrix {
public:
  DistanceMatrix() = default;
  /// Takes a full row-major n*n buffer and validates symmetry, finiteness and the diagonal.
  DistanceMatrix(std::size_t n, std::vector<double> entries);

  std::size_t size() const noexcept { return n_; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return d_[i * n_ + j]; }
  std::span<const double> row(std::size_t i) const noexcept { return {d_.data() + i * n_, n_}; }

  bool operator==(const DistanceMatrix&) const = default;

private:
  std::size_t n_ = 0;
  std::vector<double> d_;
};

/// Evaluates `kernel(i, j)` once per i < j, mirroring into a dense matrix. Rows are
/// distributed over `threads` workers (0 = hardware concurrency); each cell has exactly one
/// writer so the result does not depend on the schedule.
DistanceMatrix pairwise_matrix(std::size_t n, const std::function<double(std::size_t, std::size_t)>& kernel,
                               unsigned threads = 0);

DistanceMatrix distance_matrix(const Dataset& ds, const WarpingWindow& window, unsigned threads = 0);

/// a_ij = exp(-gamma * d_ij).
class AffinityMatrix {
public:
  AffinityMatrix() = default;
  AffinityMatrix(const DistanceMatrix& dm, double gamma);

  std::size_t size() const noexcept { return n_; }
  double gamma() const noexcept { return gamma_; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return a_[i * n_ + j]; }

private:
  std::size_t n_ = 0;
  double gamma_ = 0.0;
  std::vector<double> a_;
};

AffinityMatrix to_affinity(const DistanceMatrix& dm, double gamma);

// Binary layout: 8-byte magic "CBRSDMAT", uint64 n (little endian), then the lower
// triangle including the diagonal, row by row, as little-endian IEEE-754 doubles.
void write_distance_matrix(const DistanceMatrix& dm, const std::filesystem::path& path);
DistanceMatrix read_distance_matrix(const std::filesystem::path& path);
std::string distance_matrix_csv(const DistanceMatrix& dm);

}  // namespace cobras
