#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cobras_ts/engine.hpp"

namespace cobras::eval {

/// Adjusted Rand Index via the contingency table. Two partitions that are both a single
/// cluster, or both all-singletons, score 1.
double ari(std::span<const std::size_t> a, std::span<const std::size_t> b);
/// Label-string overload; labels are only compared for equality.
double ari(std::span<const std::string> a, std::span<const std::size_t> b);

/// Dense integer ids for string labels, in order of first appearance.
std::vector<std::size_t> encode_labels(std::span<const std::string> labels);

struct FoldSplit {
  std::size_t fold_count = 10;
  std::vector<std::size_t> fold_of;  ///< instance -> fold
  std::uint64_t rng_seed = 0;
  bool stratified = true;

  std::vector<bool> train_mask(std::size_t fold) const;
  std::vector<std::size_t> test_indices(std::size_t fold) const;
};

/// Seeded shuffle per class (stratified when labels exist), dealt round robin across folds.
FoldSplit make_folds(const Dataset& ds, std::size_t fold_count = 10, std::uint64_t rng_seed = 0);

struct EvalResult {
  /// fold_curves[f][q] = test-set ARI after q answers, q = 0 .. budget.
  std::vector<std::vector<double>> fold_curves;
  std::vector<double> mean_curve;
  std::vector<double> fold_final;
  double final_mean_ari = 0.0;
  std::vector<std::size_t> fold_queries_used;
};

/// Cross-validated protocol: every fold clusters the full dataset, queries only the other
/// folds, and is scored on its own instances. Curves are padded with their final value
/// when a run converges before the budget. Folds run concurrently (`threads` = 0 uses
/// hardware concurrency).
EvalResult evaluate(const Dataset& ds, const EngineConfig& config, const FoldSplit& folds, unsigned threads = 0,
                    std::shared_ptr<const DistanceMatrix> precomputed = nullptr);

/// `fold,query_count,ari` rows.
std::string curves_csv(const EvalResult& result);
nlohmann::json summary_json(const EvalResult& result, const EngineConfig& config, const FoldSplit& folds);

struct SweepPoint {
  double gamma = 0.0;
  WarpingWindow window = WarpingWindow::full();
  double final_mean_ari = 0.0;
};

/// grid[g][w] for every gamma x window combination.
std::vector<std::vector<SweepPoint>> sweep(const Dataset& ds, const EngineConfig& base, std::span<const double> gammas,
                                           std::span<const WarpingWindow> windows, const FoldSplit& folds);
/// `gamma,window,final_mean_ari` rows.
std::string sweep_csv(const std::vector<std::vector<SweepPoint>>& grid);

/// Unsupervised k-Shape with the true number of classes, scored on all instances.
double kshape_baseline(const Dataset& ds, std::size_t k_true, std::uint64_t seed);

}  // namespace cobras::eval
