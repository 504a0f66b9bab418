#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cobras_ts/error.hpp"

namespace cobras {

/// A univariate, finite, real-valued sequence of length >= 2.
class TimeSeries {
public:
  TimeSeries() = default;
  explicit TimeSeries(std::vector<double> values);

  std::size_t size() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }

  bool operator==(const TimeSeries&) const = default;

private:
  std::vector<double> values_;
};

/// Equal-length collection of series with optional class labels.
/// Labels are opaque strings; only equality matters downstream.
class Dataset {
public:
  Dataset() = default;
  Dataset(std::vector<TimeSeries> series, std::optional<std::vector<std::string>> labels,
          std::string name = {});

  std::size_t size() const noexcept { return series_.size(); }
  std::size_t length() const noexcept { return series_.empty() ? 0 : series_.front().size(); }
  const std::string& name() const noexcept { return name_; }

  const std::vector<TimeSeries>& series() const noexcept { return series_; }
  const TimeSeries& operator[](std::size_t i) const noexcept { return series_[i]; }

  bool has_labels() const noexcept { return labels_.has_value(); }
  /// Throws PreconditionError when the dataset is unlabeled.
  const std::vector<std::string>& labels() const;

  /// Number of distinct labels.
  std::size_t class_count() const;

  /// Copy with every series z-normalized.
  Dataset z_normalized() const;

private:
  std::vector<TimeSeries> series_;
  std::optional<std::vector<std::string>> labels_;
  std::string name_;
};

enum class Delimiter { Auto, Comma, Tab, Whitespace };

/// Parses UCR-style text: one series per line, `label<d>v1<d>...<d>vm`.
/// With Delimiter::Auto the first data line decides: comma, then tab, then whitespace.
Dataset parse_ucr(std::string_view text, Delimiter delimiter = Delimiter::Auto, std::string name = {});
Dataset load_ucr(const std::filesystem::path& path, Delimiter delimiter = Delimiter::Auto);

/// Writes shortest round-trip representations, so parse(write(ds)) == ds exactly.
std::string format_ucr(const Dataset& ds, Delimiter delimiter = Delimiter::Comma);
void save_ucr(const Dataset& ds, const std::filesystem::path& path, Delimiter delimiter = Delimiter::Comma);

Delimiter parse_delimiter(std::string_view name);

/// Zero mean, unit population standard deviation. Near-constant input (std < 1e-12)
/// maps to the all-zero series.
TimeSeries z_normalize(const TimeSeries& ts);
std::vector<double> z_normalize(std::span<const double> values);

/// Cylinder-Bell-Funnel generator settings.
struct CbfParams {
  std::size_t per_class_count = 10;
  std::size_t length = 128;
  double noise_std = 1.0;
  std::uint64_t rng_seed = 0;
};

/// Classical Cylinder-Bell-Funnel family: onset a in [16, 32], duration in [32, 96]
/// (both scaled by length/128), amplitude 6 + N(0,1), additive N(0, noise_std).
/// Rows are ordered cylinder, bell, funnel with per_class_count rows each.
Dataset generate_cbf(const CbfParams& params);

}  // namespace cobras
