#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cobras_ts/eval.hpp"
#include "cobras_ts/shape.hpp"
#include "datasets.hpp"
#include "oracles.hpp"

using namespace cobras;
using namespace cobras::shape;

namespace {

std::vector<double> random_series(std::mt19937_64& rng, std::size_t m) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(m);
  for (auto& x : v) x = g(rng);
  return v;
}

using testdata::sine_square;

double norm(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST(Ncc, SelfCorrelationIsOneAtShiftZero) {
  std::mt19937_64 rng(1);
  const auto x = z_normalize(random_series(rng, 33));
  const auto r = ncc_max(x, x);
  EXPECT_NEAR(r.value, 1.0, 1e-12);
  EXPECT_EQ(r.shift, 0);
}

TEST(Ncc, MatchesDirectSlidingDotProduct) {
  std::mt19937_64 rng(99);
  for (int rep = 0; rep < 250; ++rep) {
    const std::size_t m = 2 + rep % 63;
    const auto x = random_series(rng, m), y = random_series(rng, m);
    const auto fast = ncc_max(x, y);
    const auto [value, shift] = oracle::ncc_by_sliding(x, y);
    EXPECT_NEAR(fast.value, value, 1e-9) << "m=" << m;
    EXPECT_EQ(fast.shift, shift) << "m=" << m;
  }
}

TEST(Ncc, RecoversALinearShift) {
  for (long s : {-5L, -1L, 2L, 6L}) {
    std::vector<double> x(16, 0.0);
    x[7] = 1.0;
    x[8] = 3.0;
    x[9] = -2.0;
    // y[t + s] == x[t]
    const auto y = shift_series(x, -s);
    const auto r = ncc_max(x, y);
    EXPECT_NEAR(r.value, 1.0, 1e-12);
    EXPECT_EQ(r.shift, s);
    const auto [value, shift] = oracle::ncc_by_sliding(x, y);
    EXPECT_EQ(shift, s);
    EXPECT_NEAR(value, 1.0, 1e-12);
  }
}

TEST(Ncc, ZeroNormIsDegenerate) {
  const std::vector<double> zero(8, 0.0), x{1, 2, 3, 4, 5, 6, 7, 8};
  try {
    ncc_max(zero, x);
    FAIL();
  } catch (const PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("degenerate series"), std::string::npos);
  }
  EXPECT_EQ(sbd_or_one(zero, x), 1.0);
}

TEST(Sbd, RangeSymmetryAndExtremes) {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t m = 4 + rep % 50;
    const auto x = z_normalize(random_series(rng, m)), y = z_normalize(random_series(rng, m));
    const double d = sbd(x, y);
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 2.0);
    EXPECT_NEAR(d, sbd(y, x), 1e-9);
    EXPECT_NEAR(sbd(x, x), 0.0, 1e-12);
  }
}

TEST(Sbd, NegationIsFarButBelowTwo) {
  // Correlation is -1 at shift 0, but the outermost zero-padded shifts overlap in a single
  // sample and correlate at -x[0]x[m-1]/|x|^2 > -1, so the maximum stays above -1.
  std::mt19937_64 rng(14);
  for (int rep = 0; rep < 50; ++rep) {
    const auto zx = z_normalize(random_series(rng, 3 + rep));
    std::vector<double> neg(zx.size());
    for (std::size_t i = 0; i < zx.size(); ++i) neg[i] = -zx[i];
    const auto [value, shift] = oracle::ncc_by_sliding(zx, neg);
    EXPECT_NEAR(sbd(zx, neg), 1.0 - value, 1e-9);
    EXPECT_LT(sbd(zx, neg), 2.0);
    (void)shift;
  }
}

TEST(Sbd, ScaleInvariantAfterNormalization) {
  std::mt19937_64 rng(6);
  for (double c : {0.01, 3.0, 1e4}) {
    const auto x = random_series(rng, 40);
    std::vector<double> cx(x);
    for (auto& v : cx) v *= c;
    EXPECT_LT(sbd(z_normalize(x), z_normalize(cx)), 1e-9);
  }
}

TEST(ShapeExtraction, ZeroMeanUnitNormAndAgreesWithMembers) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g(0.0, 0.1);
  std::vector<std::vector<double>> members;
  for (int i = 0; i < 5; ++i) {
    std::vector<double> v(32);
    for (std::size_t t = 0; t < v.size(); ++t) v[t] = std::sin(t / 4.0) + g(rng);
    members.push_back(z_normalize(v));
  }
  std::vector<std::span<const double>> views(members.begin(), members.end());
  const std::vector<double> zero(32, 0.0);
  const auto c = extract_shape(views, zero);
  double mean = 0;
  for (double v : c) mean += v;
  EXPECT_NEAR(mean, 0.0, 1e-9);
  EXPECT_NEAR(norm(c), 1.0, 1e-9);
  for (const auto& m : members) EXPECT_LT(sbd(m, c), 0.1);

  // With a reference the sign follows it.
  std::vector<double> flipped(c);
  for (auto& v : flipped) v = -v;
  const auto c2 = extract_shape(views, flipped);
  double dot = 0;
  for (std::size_t i = 0; i < c2.size(); ++i) dot += c2[i] * flipped[i];
  EXPECT_GE(dot, 0.0);
}

TEST(KShape, SeparatesSineFromSquare) {
  const auto ds = sine_square(21, 0.05, 20, 0.1);
  const auto res = kshape(ds, {2, 3, 100});
  EXPECT_EQ(eval::ari(std::span<const std::string>(ds.labels()), res.assignment), 1.0);
}

TEST(KShape, KEqualsNGivesSingletons) {
  const auto ds = sine_square(2);
  const Dataset small(std::vector<TimeSeries>(ds.series().begin(), ds.series().begin() + 5), std::nullopt);
  const auto res = kshape(small, {5, 0, 100});
  std::vector<std::size_t> sorted = res.assignment;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(sorted, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  const auto z = small.z_normalized();
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(sbd(z[i].values(), res.centroids[res.assignment[i]]), 0.0, 1e-9);
}

TEST(KShape, DeterministicPerSeed) {
  const auto ds = sine_square(8, 0.5);
  const auto a = kshape(ds, {3, 11, 100});
  const auto b = kshape(ds, {3, 11, 100});
  EXPECT_EQ(a.assignment, b.assignment);
  EXPECT_EQ(a.centroids, b.centroids);
  EXPECT_EQ(a.iterations, b.iterations);
}

TEST(KShape, ObjectiveDoesNotIncreaseAndCentroidsAreNormalized) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto ds = sine_square(seed, 0.6);
    const auto res = kshape(ds, {3, seed, 100});
    for (std::size_t i = 1; i < res.objective.size(); ++i) EXPECT_LE(res.objective[i], res.objective[i - 1] + 1e-6);
    for (const auto& c : res.centroids) {
      double mean = 0;
      for (double v : c) mean += v;
      EXPECT_NEAR(mean, 0.0, 1e-9);
      EXPECT_NEAR(norm(c), 1.0, 1e-9);
    }
    EXPECT_EQ(res.assignment.size(), ds.size());
    for (auto a : res.assignment) EXPECT_LT(a, 3u);
  }
}

TEST(KShape, TooManyClustersIsAnError) {
  const auto ds = sine_square(1);
  const Dataset small(std::vector<TimeSeries>(ds.series().begin(), ds.series().begin() + 3), std::nullopt);
  EXPECT_THROW(kshape(small, {4, 0, 10}), PreconditionError);
}

TEST(SbdRepresentative, SingletonAndDuplicates) {
  std::vector<TimeSeries> series;
  series.emplace_back(z_normalize(std::vector<double>{5, 1, 2, 9, 1, 0, 3, 3}));
  series.emplace_back(z_normalize(std::vector<double>{0, 1, 2, 3, 2, 1, 0, 0}));
  series.emplace_back(z_normalize(std::vector<double>{0, 1, 2, 3, 2, 1, 0, 0}));
  const std::vector<std::size_t> one{0};
  EXPECT_EQ(sbd_representative(one, series), 0u);
  const std::vector<std::size_t> all{0, 1, 2};
  EXPECT_EQ(sbd_representative(all, series), 1u);
  const std::vector<std::size_t> tail{2, 0};
  const auto r = sbd_representative(tail, series);
  EXPECT_TRUE(r == 0 || r == 2);
}
