#include "cobras_ts/shape.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <random>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "cobras_ts/error.hpp"

namespace cobras::shape {

namespace {

constexpr double kPowerTolerance = 1e-8;
constexpr std::size_t kPowerMaxIter = 300;

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

bool is_zero(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

std::size_t next_pow2(std::size_t v) {
  std::size_t p = 1;
  while (p < v) p <<= 1;
  return p;
}

// cc[s + m - 1] = sum_t x[t] * y[t + s] for s in (-m, m).
std::vector<double> cross_correlation(std::span<const double> x, std::span<const double> y) {
  const std::size_t m = x.size();
  const std::size_t len = next_pow2(2 * m - 1);
  thread_local Eigen::FFT<double> fft;

  std::vector<double> xp(len, 0.0), yp(len, 0.0);
  std::copy(x.begin(), x.end(), xp.begin());
  std::copy(y.begin(), y.end(), yp.begin());
  std::vector<std::complex<double>> fx, fy;
  fft.fwd(fx, xp);
  fft.fwd(fy, yp);
  for (std::size_t k = 0; k < fx.size(); ++k) fx[k] = std::conj(fx[k]) * fy[k];
  std::vector<double> r;
  fft.inv(r, fx);

  std::vector<double> cc(2 * m - 1);
  for (std::size_t s = 0; s < m; ++s) cc[m - 1 + s] = r[s];
  for (std::size_t s = 1; s < m; ++s) cc[m - 1 - s] = r[len - s];
  return cc;
}

NccResult ncc_unchecked(std::span<const double> x, std::span<const double> y, double denom) {
  const auto cc = cross_correlation(x, y);
  const long m = static_cast<long>(x.size());
  NccResult best{-std::numeric_limits<double>::infinity(), 0};
  for (long s = -(m - 1); s <= m - 1; ++s) {
    const double v = cc[static_cast<std::size_t>(s + m - 1)] / denom;
    if (v > best.value) best = {v, s};
  }
  best.value = std::clamp(best.value, -1.0, 1.0);
  return best;
}

}  // namespace

NccResult ncc_max(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw PreconditionError("ncc_max needs equal-length series");
  if (x.empty()) throw PreconditionError("degenerate series");
  const double denom = norm(x) * norm(y);
  if (!(denom > 0.0)) throw PreconditionError("degenerate series");
  return ncc_unchecked(x, y, denom);
}

NccResult ncc_max(const TimeSeries& x, const TimeSeries& y) { return ncc_max(x.values(), y.values()); }

double sbd(std::span<const double> x, std::span<const double> y) {
  return std::clamp(1.0 - ncc_max(x, y).value, 0.0, 2.0);
}

double sbd(const TimeSeries& x, const TimeSeries& y) { return sbd(x.values(), y.values()); }

double sbd_or_one(std::span<const double> x, std::span<const double> y) {
  const double denom = norm(x) * norm(y);
  if (!(denom > 0.0)) return 1.0;
  return std::clamp(1.0 - ncc_unchecked(x, y, denom).value, 0.0, 2.0);
}

std::vector<double> shift_series(std::span<const double> y, long shift) {
  const long m = static_cast<long>(y.size());
  std::vector<double> out(y.size(), 0.0);
  for (long t = 0; t < m; ++t) {
    const long src = t + shift;
    if (src >= 0 && src < m) out[static_cast<std::size_t>(t)] = y[static_cast<std::size_t>(src)];
  }
  return out;
}

std::vector<double> extract_shape(std::span<const std::span<const double>> members,
                                  std::span<const double> reference) {
  const std::size_t m = reference.size();
  if (members.empty()) return std::vector<double>(m, 0.0);
  const bool have_reference = !is_zero(reference);

  Eigen::MatrixXd aligned(static_cast<Eigen::Index>(members.size()), static_cast<Eigen::Index>(m));
  for (std::size_t r = 0; r < members.size(); ++r) {
    if (members[r].size() != m) throw PreconditionError("extract_shape needs equal-length series");
    std::vector<double> row(members[r].begin(), members[r].end());
    if (have_reference && !is_zero(row)) {
      const double denom = norm(reference) * norm(row);
      row = shift_series(row, ncc_unchecked(reference, row, denom).shift);
    }
    row = z_normalize(row);
    for (std::size_t t = 0; t < m; ++t) aligned(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(t)) = row[t];
  }

  const auto mi = static_cast<Eigen::Index>(m);
  const Eigen::MatrixXd scatter = aligned.transpose() * aligned;
  const Eigen::MatrixXd q =
      Eigen::MatrixXd::Identity(mi, mi) - Eigen::MatrixXd::Constant(mi, mi, 1.0 / static_cast<double>(m));
  const Eigen::MatrixXd target = q * scatter * q;

  const Eigen::VectorXd member_sum = aligned.colwise().sum().transpose();
  Eigen::VectorXd v;
  if (have_reference) {
    v = Eigen::Map<const Eigen::VectorXd>(reference.data(), mi);
  } else if (member_sum.norm() > 1e-12) {
    v = member_sum;
  } else {
    v = aligned.row(0).transpose();
  }
  v = q * v;
  if (v.norm() < 1e-12) {
    v = Eigen::VectorXd::Zero(mi);
    v(0) = 1.0;
    v = q * v;
  }
  v.normalize();

  for (std::size_t it = 0; it < kPowerMaxIter; ++it) {
    Eigen::VectorXd next = target * v;
    const double n = next.norm();
    if (n < 1e-300) return std::vector<double>(m, 0.0);  // all members flat
    next /= n;
    const double delta = (next - v).norm();
    v = std::move(next);
    if (delta < kPowerTolerance) break;
  }

  double orientation = 0.0;
  if (have_reference) {
    orientation = v.dot(Eigen::Map<const Eigen::VectorXd>(reference.data(), mi));
  } else {
    orientation = v.dot(member_sum);
    if (orientation == 0.0) orientation = v.dot(aligned.row(0).transpose());
  }
  if (orientation < 0.0) v = -v;

  v.array() -= v.mean();
  v.normalize();
  return std::vector<double>(v.data(), v.data() + m);
}

namespace {

std::vector<std::span<const double>> spans_of(std::span<const TimeSeries> series,
                                              std::span<const std::size_t> ids) {
  std::vector<std::span<const double>> out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back(series[id].values());
  return out;
}

}  // namespace

KShapeResult kshape(std::span<const TimeSeries> series, const KShapeOptions& options) {
  const std::size_t n = series.size();
  const std::size_t k = options.k;
  if (k == 0) throw PreconditionError("kshape needs k >= 1");
  if (k > n) throw PreconditionError("kshape needs k <= number of series");
  const std::size_t m = series.front().size();

  KShapeResult result;
  result.assignment.resize(n);
  {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(options.rng_seed);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t p = 0; p < n; ++p) result.assignment[order[p]] = p % k;
  }
  result.centroids.assign(k, std::vector<double>(m, 0.0));

  std::vector<std::vector<double>> dist(n, std::vector<double>(k));
  for (std::size_t iter = 1; iter <= std::max<std::size_t>(options.max_iter, 1); ++iter) {
    const auto previous = result.assignment;

    for (std::size_t c = 0; c < k; ++c) {
      std::vector<std::size_t> ids;
      for (std::size_t i = 0; i < n; ++i)
        if (result.assignment[i] == c) ids.push_back(i);
      const auto members = spans_of(series, ids);
      result.centroids[c] = extract_shape(members, result.centroids[c]);
    }

    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < k; ++c) dist[i][c] = sbd_or_one(series[i].values(), result.centroids[c]);

    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& row = dist[i];
      result.assignment[i] = static_cast<std::size_t>(std::min_element(row.begin(), row.end()) - row.begin());
      ++counts[result.assignment[i]];
    }

    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[result.assignment[i]] < 2) continue;
        if (far == n || dist[i][result.assignment[i]] > dist[far][result.assignment[far]]) far = i;
      }
      --counts[result.assignment[far]];
      result.assignment[far] = c;
      counts[c] = 1;
    }

    double objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) objective += dist[i][result.assignment[i]];
    result.objective.push_back(objective);
    result.iterations = iter;

    if (result.assignment == previous) {
      result.converged = true;
      break;
    }
  }
  return result;
}

KShapeResult kshape(const Dataset& ds, const KShapeOptions& options) {
  const auto normalized = ds.z_normalized();
  return kshape(std::span<const TimeSeries>(normalized.series()), options);
}

std::size_t sbd_representative(std::span<const std::size_t> members, std::span<const TimeSeries> series) {
  if (members.empty()) throw PreconditionError("sbd_representative needs at least one member");
  if (members.size() == 1) return members.front();
  const auto spans = spans_of(series, members);
  const std::vector<double> zero(series[members.front()].size(), 0.0);
  const auto centroid = extract_shape(spans, zero);

  std::size_t best = members.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < members.size(); ++p) {
    const double d = sbd_or_one(spans[p], centroid);
    if (d < best_d || (d == best_d && members[p] < best)) {
      best = members[p];
      best_d = d;
    }
  }
  return best;
}

std::size_t sbd_representative(std::span<const std::size_t> members, const Dataset& ds) {
  const auto normalized = ds.z_normalized();
  return sbd_representative(members, std::span<const TimeSeries>(normalized.series()));
}

}  // namespace cobras::shape
