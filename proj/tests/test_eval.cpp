#include <gtest/gtest.h>

#include <random>
#include <set>

#include "cobras_ts/eval.hpp"
#include "datasets.hpp"
#include "oracles.hpp"

using namespace cobras;

namespace {

Dataset cbf(std::uint64_t seed, std::size_t per_class = 10) { return generate_cbf({per_class, 64, 0.1, seed}); }

}  // namespace

TEST(Ari, WorkedExamples) {
  const std::vector<std::size_t> a{0, 0, 1, 1}, swapped{1, 1, 0, 0}, crossed{0, 1, 0, 1};
  EXPECT_EQ(eval::ari(a, swapped), 1.0);
  EXPECT_NEAR(eval::ari(a, crossed), -0.5, 1e-12);
  const std::vector<std::size_t> one(5, 0), singletons{0, 1, 2, 3, 4};
  EXPECT_EQ(eval::ari(one, one), 1.0);
  EXPECT_EQ(eval::ari(singletons, singletons), 1.0);
}

TEST(Ari, MatchesPairCounting) {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 500; ++rep) {
    const std::size_t n = 2 + rep % 11;
    std::uniform_int_distribution<std::size_t> la(0, rep % 5), lb(0, (rep / 5) % 5);
    std::vector<std::size_t> a(n), b(n);
    for (auto& x : a) x = la(rng);
    for (auto& x : b) x = lb(rng);
    EXPECT_NEAR(eval::ari(a, b), oracle::ari_by_pairs(a, b), 1e-12);
    EXPECT_NEAR(eval::ari(a, b), eval::ari(b, a), 1e-12);
  }
}

TEST(Ari, StringLabelsAndMismatch) {
  const std::vector<std::string> s{"x", "x", "y", "y"};
  EXPECT_EQ(eval::ari(s, std::vector<std::size_t>{5, 5, 2, 2}), 1.0);
  EXPECT_EQ(eval::encode_labels(s), (std::vector<std::size_t>{0, 0, 1, 1}));
  EXPECT_THROW(eval::ari(std::vector<std::size_t>{0, 1}, std::vector<std::size_t>{0}), PreconditionError);
}

TEST(Folds, PartitionAndStratify) {
  const auto ds = cbf(1);
  const auto folds = eval::make_folds(ds, 10, 4);
  std::vector<int> seen(ds.size(), 0);
  for (std::size_t f = 0; f < 10; ++f) {
    const auto test = folds.test_indices(f);
    EXPECT_EQ(test.size(), 3u);
    std::set<std::string> classes;
    for (auto i : test) {
      ++seen[i];
      classes.insert(ds.labels()[i]);
    }
    EXPECT_EQ(classes.size(), 3u);  // one instance per class
    const auto mask = folds.train_mask(f);
    for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_EQ(mask[i], folds.fold_of[i] != f);
  }
  for (int s : seen) EXPECT_EQ(s, 1);
  EXPECT_EQ(eval::make_folds(ds, 10, 4).fold_of, folds.fold_of);
  EXPECT_NE(eval::make_folds(ds, 10, 5).fold_of, folds.fold_of);
}

TEST(Evaluate, CurvesAreWellFormed) {
  const auto ds = cbf(3);
  EngineConfig config;
  config.budget = 20;
  const auto folds = eval::make_folds(ds, 5, 0);
  const auto r = eval::evaluate(ds, config, folds, 2);
  ASSERT_EQ(r.fold_curves.size(), 5u);
  ASSERT_EQ(r.mean_curve.size(), config.budget + 1);
  double mean_final = 0;
  for (std::size_t f = 0; f < 5; ++f) {
    ASSERT_EQ(r.fold_curves[f].size(), config.budget + 1);
    for (double v : r.fold_curves[f]) {
      EXPECT_GE(v, -1.0);
      EXPECT_LE(v, 1.0);
    }
    EXPECT_EQ(r.fold_final[f], r.fold_curves[f].back());
    EXPECT_LE(r.fold_queries_used[f], config.budget);
    mean_final += r.fold_final[f] / 5;
  }
  EXPECT_NEAR(r.final_mean_ari, mean_final, 1e-12);
  EXPECT_NEAR(r.mean_curve.back(), r.final_mean_ari, 1e-12);

  // The final point is the test-set score of the clustering the engine returns.
  for (std::size_t f = 0; f < 5; ++f) {
    LabelOracle oracle(ds.labels());
    const auto run = cobras::run(ds, config, oracle, folds.train_mask(f));
    const auto labels = run.clustering.labels(ds.size());
    std::vector<std::string> truth;
    std::vector<std::size_t> predicted;
    for (auto i : folds.test_indices(f)) {
      truth.push_back(ds.labels()[i]);
      predicted.push_back(labels[i]);
    }
    EXPECT_NEAR(eval::ari(truth, predicted), r.fold_final[f], 1e-12);
  }

  const auto csv = eval::curves_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "fold,query_count,ari");
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), 1 + 5 * (config.budget + 1));
  const auto summary = eval::summary_json(r, config, folds);
  EXPECT_NEAR(summary.at("final_mean_ari").get<double>(), r.final_mean_ari, 1e-12);
}

TEST(Evaluate, ThreadCountDoesNotMatter) {
  const auto ds = cbf(8);
  EngineConfig config;
  config.budget = 15;
  const auto folds = eval::make_folds(ds, 10, 1);
  EXPECT_EQ(eval::evaluate(ds, config, folds, 1).fold_curves, eval::evaluate(ds, config, folds, 4).fold_curves);
}

TEST(Evaluate, SeparableTwoClassData) {
  const auto ds = testdata::sine_square(4, 0.05, 10);
  EngineConfig config;
  config.budget = 25;
  const auto r = eval::evaluate(ds, config, eval::make_folds(ds, 10, 0), 1);
  EXPECT_EQ(r.final_mean_ari, 1.0);
}

TEST(Evaluate, TestLabelsNeverReachTheEngine) {
  // Scrambling the labels of the held-out fold must not change a single query or answer.
  const auto ds = cbf(9);
  EngineConfig config;
  config.budget = 30;
  const auto folds = eval::make_folds(ds, 10, 2);
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> pick(0, 2);
  const std::string names[] = {"cylinder", "bell", "funnel"};
  for (std::size_t f = 0; f < 3; ++f) {
    auto scrambled = ds.labels();
    for (auto i : folds.test_indices(f)) scrambled[i] = names[pick(rng)] + "?";
    LabelOracle honest(ds.labels()), blind(scrambled);
    const auto a = cobras::run(ds, config, honest, folds.train_mask(f));
    const auto b = cobras::run(ds, config, blind, folds.train_mask(f));
    EXPECT_EQ(a.log, b.log);
    EXPECT_EQ(a.clustering, b.clustering);
  }
}

TEST(Evaluate, RejectsBadFolds) {
  const auto ds = cbf(2, 2);
  EngineConfig config;
  EXPECT_THROW(eval::evaluate(ds, config, eval::make_folds(ds, 10, 0)), PreconditionError);
}

TEST(Sweep, SingleCellEqualsEvaluate) {
  const auto ds = cbf(6);
  EngineConfig config;
  config.budget = 12;
  const auto folds = eval::make_folds(ds, 5, 0);
  const std::vector<double> one_gamma{0.5};
  const std::vector<WarpingWindow> one_window{WarpingWindow::fraction(0.1)};
  const auto grid = eval::sweep(ds, config, one_gamma, one_window, folds);
  ASSERT_EQ(grid.size(), 1u);
  ASSERT_EQ(grid[0].size(), 1u);
  EXPECT_EQ(grid[0][0].final_mean_ari, eval::evaluate(ds, config, folds).final_mean_ari);

  const std::vector<double> gammas{0.1, 1.0};
  const std::vector<WarpingWindow> windows{WarpingWindow::fraction(0.05), WarpingWindow::fraction(0.2), WarpingWindow::full()};
  const auto big = eval::sweep(ds, config, gammas, windows, folds);
  ASSERT_EQ(big.size(), 2u);
  for (std::size_t g = 0; g < 2; ++g) {
    ASSERT_EQ(big[g].size(), 3u);
    for (std::size_t w = 0; w < 3; ++w) EXPECT_EQ(big[g][w].gamma, gammas[g]);
  }
  EXPECT_TRUE(big[1][2].window.is_full());
  const auto csv = eval::sweep_csv(big);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "gamma,window,final_mean_ari");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
}

TEST(KShapeBaseline, DeterministicAndSeparatesEasyData) {
  const auto ds = testdata::sine_square(21, 0.05, 20, 0.1);
  EXPECT_EQ(eval::kshape_baseline(ds, 2, 3), 1.0);
  const auto noisy = cbf(4);
  EXPECT_EQ(eval::kshape_baseline(noisy, 3, 7), eval::kshape_baseline(noisy, 3, 7));
}
