#include "cobras_ts/eval.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "cobras_ts/shape.hpp"

namespace cobras::eval {

namespace {

double choose2(std::uint64_t v) { return v < 2 ? 0.0 : static_cast<double>(v * (v - 1) / 2); }

}  // namespace

double ari(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  if (a.size() != b.size()) throw PreconditionError("ari needs partitions of equal length");
  if (a.size() < 2) throw PreconditionError("ari needs at least two instances");

  std::map<std::pair<std::size_t, std::size_t>, std::uint64_t> joint;
  std::map<std::size_t, std::uint64_t> rows, cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++joint[{a[i], b[i]}];
    ++rows[a[i]];
    ++cols[b[i]];
  }
  double index = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& [_, c] : joint) index += choose2(c);
  for (const auto& [_, c] : rows) sum_a += choose2(c);
  for (const auto& [_, c] : cols) sum_b += choose2(c);

  const double total = choose2(a.size());
  const double expected = sum_a * sum_b / total;
  const double max_index = 0.5 * (sum_a + sum_b);
  const double denom = max_index - expected;
  // Zero exactly when both partitions are all-singletons or both a single cluster.
  if (denom == 0.0) return 1.0;
  return (index - expected) / denom;
}

std::vector<std::size_t> encode_labels(std::span<const std::string> labels) {
  std::map<std::string, std::size_t> ids;
  std::vector<std::size_t> out;
  out.reserve(labels.size());
  for (const auto& l : labels) out.push_back(ids.emplace(l, ids.size()).first->second);
  return out;
}

double ari(std::span<const std::string> a, std::span<const std::size_t> b) {
  const auto ids = encode_labels(a);
  return ari(std::span<const std::size_t>(ids), b);
}

std::vector<bool> FoldSplit::train_mask(std::size_t fold) const {
  std::vector<bool> mask(fold_of.size());
  for (std::size_t i = 0; i < fold_of.size(); ++i) mask[i] = fold_of[i] != fold;
  return mask;
}

std::vector<std::size_t> FoldSplit::test_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] == fold) out.push_back(i);
  return out;
}

FoldSplit make_folds(const Dataset& ds, std::size_t fold_count, std::uint64_t rng_seed) {
  if (fold_count < 2) throw PreconditionError("need at least two folds");
  if (ds.size() < fold_count) throw PreconditionError("fewer instances than folds");
  FoldSplit split;
  split.fold_count = fold_count;
  split.rng_seed = rng_seed;
  split.stratified = ds.has_labels();
  split.fold_of.assign(ds.size(), 0);

  std::vector<std::vector<std::size_t>> groups;
  if (ds.has_labels()) {
    const auto ids = encode_labels(ds.labels());
    groups.resize(*std::max_element(ids.begin(), ids.end()) + 1);
    for (std::size_t i = 0; i < ids.size(); ++i) groups[ids[i]].push_back(i);
  } else {
    groups.emplace_back(ds.size());
    std::iota(groups.back().begin(), groups.back().end(), 0);
  }

  std::mt19937_64 rng(rng_seed);
  std::size_t dealt = 0;
  for (auto& g : groups) {
    std::shuffle(g.begin(), g.end(), rng);
    for (auto i : g) split.fold_of[i] = dealt++ % fold_count;
  }
  return split;
}

EvalResult evaluate(const Dataset& ds, const EngineConfig& config, const FoldSplit& folds, unsigned threads,
                    std::shared_ptr<const DistanceMatrix> precomputed) {
  const auto& labels = ds.labels();
  if (folds.fold_of.size() != ds.size()) throw PreconditionError("fold split does not match dataset");
  for (std::size_t f = 0; f < folds.fold_count; ++f)
    if (folds.test_indices(f).size() < 2) throw PreconditionError("every fold needs at least two test instances");

  auto ws = std::make_shared<const Workspace>(ds, config, std::move(precomputed));
  const auto truth = encode_labels(labels);

  EvalResult result;
  result.fold_curves.resize(folds.fold_count);
  result.fold_queries_used.resize(folds.fold_count);
  std::vector<std::exception_ptr> errors(folds.fold_count);

  auto run_fold = [&](std::size_t f) {
    try {
      LabelOracle oracle(labels);
      Engine engine(ws, config, folds.train_mask(f));
      const RunResult run = engine.run(oracle);

      const auto test = folds.test_indices(f);
      std::vector<std::size_t> test_truth, predicted(test.size());
      for (auto i : test) test_truth.push_back(truth[i]);
      auto& curve = result.fold_curves[f];
      for (const auto& snapshot : run.snapshots) {
        for (std::size_t p = 0; p < test.size(); ++p) predicted[p] = snapshot[test[p]];
        curve.push_back(ari(test_truth, predicted));
      }
      curve.resize(config.budget + 1, curve.back());
      result.fold_queries_used[f] = run.queries_used;
    } catch (...) {
      errors[f] = std::current_exception();
    }
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < std::min<std::size_t>(threads, folds.fold_count); ++t)
      pool.emplace_back([&] {
        for (std::size_t f = next++; f < folds.fold_count; f = next++) run_fold(f);
      });
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  result.mean_curve.assign(config.budget + 1, 0.0);
  for (const auto& curve : result.fold_curves) {
    for (std::size_t q = 0; q < curve.size(); ++q) result.mean_curve[q] += curve[q];
    result.fold_final.push_back(curve.back());
  }
  for (auto& v : result.mean_curve) v /= static_cast<double>(folds.fold_count);
  result.final_mean_ari = result.mean_curve.back();
  return result;
}

namespace {

std::string shortest(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string curves_csv(const EvalResult& result) {
  std::ostringstream out;
  out << "fold,query_count,ari\n";
  for (std::size_t f = 0; f < result.fold_curves.size(); ++f)
    for (std::size_t q = 0; q < result.fold_curves[f].size(); ++q)
      out << f << ',' << q << ',' << shortest(result.fold_curves[f][q]) << '\n';
  return out.str();
}

nlohmann::json summary_json(const EvalResult& result, const EngineConfig& config, const FoldSplit& folds) {
  return {{"config", to_json(config)},
          {"folds", folds.fold_count},
          {"fold_seed", folds.rng_seed},
          {"stratified_folds", folds.stratified},
          {"final_mean_ari", result.final_mean_ari},
          {"fold_final_ari", result.fold_final},
          {"fold_queries_used", result.fold_queries_used},
          {"mean_curve", result.mean_curve}};
}

std::vector<std::vector<SweepPoint>> sweep(const Dataset& ds, const EngineConfig& base, std::span<const double> gammas,
                                           std::span<const WarpingWindow> windows, const FoldSplit& folds) {
  std::vector<std::vector<SweepPoint>> grid(gammas.size(), std::vector<SweepPoint>(windows.size()));
  for (std::size_t w = 0; w < windows.size(); ++w) {
    EngineConfig config = base;
    config.window = windows[w];
    std::shared_ptr<const DistanceMatrix> dtw;
    if (config.refiner == Refiner::DtwSpectral)
      dtw = std::make_shared<DistanceMatrix>(distance_matrix(config.normalize ? ds.z_normalized() : ds, config.window));
    for (std::size_t g = 0; g < gammas.size(); ++g) {
      config.gamma = gammas[g];
      grid[g][w] = {gammas[g], windows[w], evaluate(ds, config, folds, 0, dtw).final_mean_ari};
    }
  }
  return grid;
}

std::string sweep_csv(const std::vector<std::vector<SweepPoint>>& grid) {
  std::ostringstream out;
  out << "gamma,window,final_mean_ari\n";
  for (const auto& row : grid)
    for (const auto& p : row) out << shortest(p.gamma) << ',' << p.window.to_string() << ',' << shortest(p.final_mean_ari) << '\n';
  return out.str();
}

double kshape_baseline(const Dataset& ds, std::size_t k_true, std::uint64_t seed) {
  const auto res = shape::kshape(ds, {k_true, seed, 100});
  return ari(std::span<const std::string>(ds.labels()), res.assignment);
}

}  // namespace cobras::eval
