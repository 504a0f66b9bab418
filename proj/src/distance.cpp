#include "cobras_ts/distance.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <thread>

#include "cobras_ts/error.hpp"

namespace cobras {

static_assert(std::endian::native == std::endian::little, "binary matrix IO assumes little endian");

WarpingWindow WarpingWindow::fraction(double w) {
  if (!(w >= 0.0 && w <= 1.0)) throw PreconditionError("warping window fraction must be in [0, 1]");
  WarpingWindow out;
  out.full_ = false;
  out.fraction_ = w;
  return out;
}

WarpingWindow WarpingWindow::parse(std::string_view text) {
  if (text == "full") return full();
  double w = 0.0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), w);
  if (ec != std::errc() || end != text.data() + text.size())
    throw PreconditionError("window must be 'full' or a fraction, got '" + std::string(text) + "'");
  return fraction(w);
}

std::size_t WarpingWindow::radius(std::size_t m) const noexcept {
  if (full_) return m;
  // The epsilon keeps e.g. 0.1 * 130 = 13.000000000000002 at 13.
  const auto r = static_cast<std::size_t>(std::ceil(fraction_ * static_cast<double>(m) - 1e-9));
  return std::clamp<std::size_t>(r, 1, m);
}

std::string WarpingWindow::to_string() const {
  if (full_) return "full";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, fraction_);
  return std::string(buf, res.ptr);
}

double cdtw(std::span<const double> x, std::span<const double> y, std::size_t radius) {
  if (x.size() != y.size()) throw PreconditionError("cdtw needs equal-length series");
  if (x.empty()) return 0.0;
  const std::size_t m = x.size();
  const std::size_t r = std::max<std::size_t>(radius, 1);
  constexpr double inf = std::numeric_limits<double>::infinity();

  // prev/cur are 1-based over j with a sentinel column 0.
  std::vector<double> prev(m + 1, inf), cur(m + 1, inf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= m; ++i) {
    const std::size_t lo = i > r ? i - r : 1;
    const std::size_t hi = std::min(m, i + r);
    // Only the cells bordering the band are reset; everything else read below is in-band.
    cur[lo - 1] = inf;
    for (std::size_t j = lo; j <= hi; ++j) {
      const double diff = x[i - 1] - y[j - 1];
      const double best = std::min({prev[j - 1], prev[j], cur[j - 1]});
      cur[j] = diff * diff + best;
    }
    if (hi < m) cur[hi + 1] = inf;
    std::swap(prev, cur);
  }
  return std::sqrt(prev[m]);
}

double cdtw(const TimeSeries& x, const TimeSeries& y, const WarpingWindow& window) {
  return cdtw(x.values(), y.values(), window.radius(x.size()));
}

DistanceMatrix::DistanceMatrix(std::size_t n, std::vector<double> entries) : n_(n), d_(std::move(entries)) {
  if (d_.size() != n_ * n_) throw PreconditionError("distance matrix buffer has the wrong size");
  for (std::size_t i = 0; i < n_; ++i) {
    if ((*this)(i, i) != 0.0) throw PreconditionError("distance matrix diagonal must be zero");
    for (std::size_t j = 0; j < i; ++j) {
      const double v = (*this)(i, j);
      if (!std::isfinite(v) || v < 0.0) throw PreconditionError("distance entries must be finite and >= 0");
      if (v != (*this)(j, i)) throw PreconditionError("distance matrix must be symmetric");
    }
  }
}

DistanceMatrix pairwise_matrix(std::size_t n, const std::function<double(std::size_t, std::size_t)>& kernel,
                               unsigned threads) {
  std::vector<double> d(n * n, 0.0);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));

  std::atomic<std::size_t> next_row{0};
  auto worker = [&] {
    for (std::size_t i = next_row++; i < n; i = next_row++) {
      for (std::size_t j = i + 1; j < n; ++j) {
        const double v = kernel(i, j);
        d[i * n + j] = v;
        d[j * n + i] = v;
      }
    }
  };

  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  return DistanceMatrix(n, std::move(d));
}

DistanceMatrix distance_matrix(const Dataset& ds, const WarpingWindow& window, unsigned threads) {
  if (ds.size() < 2) throw PreconditionError("distance matrix needs at least two series");
  const std::size_t r = window.radius(ds.length());
  return pairwise_matrix(
      ds.size(), [&](std::size_t i, std::size_t j) { return cdtw(ds[i].values(), ds[j].values(), r); },
      threads);
}

AffinityMatrix::AffinityMatrix(const DistanceMatrix& dm, double gamma) : n_(dm.size()), gamma_(gamma) {
  if (!(gamma > 0.0)) throw PreconditionError("gamma must be positive");
  a_.resize(n_ * n_);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) a_[i * n_ + j] = std::exp(-gamma * dm(i, j));
}

AffinityMatrix to_affinity(const DistanceMatrix& dm, double gamma) { return AffinityMatrix(dm, gamma); }

namespace {
constexpr char kMagic[8] = {'C', 'B', 'R', 'S', 'D', 'M', 'A', 'T'};
}

void write_distance_matrix(const DistanceMatrix& dm, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out.write(kMagic, sizeof kMagic);
  const std::uint64_t n = dm.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  for (std::size_t i = 0; i < dm.size(); ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      const double v = dm(i, j);
      out.write(reinterpret_cast<const char*>(&v), sizeof v);
    }
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

DistanceMatrix read_distance_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  char magic[8];
  std::uint64_t n = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw ParseError("not a distance matrix file: '" + path.string() + "'", 0);
  std::error_code ec;
  const auto file_size = std::filesystem::file_size(path, ec);
  if (ec || n > (1u << 20) || file_size != 16 + 8 * (n * (n + 1) / 2))
    throw ParseError("distance matrix file size does not match its header: '" + path.string() + "'", 0);

  std::vector<double> d(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) {
      double v = 0.0;
      in.read(reinterpret_cast<char*>(&v), sizeof v);
      d[i * n + j] = v;
      d[j * n + i] = v;
    }
  if (!in) throw ParseError("truncated distance matrix file: '" + path.string() + "'", 0);
  return DistanceMatrix(n, std::move(d));
}

std::string distance_matrix_csv(const DistanceMatrix& dm) {
  std::string out;
  char buf[64];
  for (std::size_t i = 0; i < dm.size(); ++i) {
    for (std::size_t j = 0; j < dm.size(); ++j) {
      if (j) out += ',';
      auto res = std::to_chars(buf, buf + sizeof buf, dm(i, j));
      out.append(buf, res.ptr);
    }
    out += '\n';
  }
  return out;
}

}  // namespace cobras
