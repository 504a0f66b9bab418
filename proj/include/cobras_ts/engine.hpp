#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cobras_ts/constraints.hpp"
#include "cobras_ts/distance.hpp"
#include "cobras_ts/oracle.hpp"
#include "cobras_ts/timeseries.hpp"

namespace cobras {

enum class Refiner { DtwSpectral, KShape };

std::string_view to_string(Refiner r);
Refiner parse_refiner(std::string_view text);

struct EngineConfig {
  Refiner refiner = Refiner::DtwSpectral;
  WarpingWindow window = WarpingWindow::fraction(0.1);
  double gamma = 0.5;
  std::size_t budget = 50;
  std::uint64_t rng_seed = 0;
  /// z-normalize series before DTW. SBD always works on z-normalized series.
  bool normalize = true;
  std::size_t kmeans_restarts = 10;
  std::size_t kshape_max_iter = 100;

  void validate() const;
};

nlohmann::json to_json(const EngineConfig& config);
EngineConfig config_from_json(const nlohmann::json& j, EngineConfig defaults = {});

struct SuperInstance {
  std::vector<std::size_t> members;        ///< sorted
  std::vector<std::size_t> train_members;  ///< sorted, non-empty subset of members
  std::size_t representative = 0;          ///< element of train_members
  bool tried_splitting = false;

  bool operator==(const SuperInstance&) const = default;
};

/// A set of clusters, each a set of super-instances. Clusters are ordered by their
/// smallest member so the instance-level labels are canonical.
struct Clustering {
  std::vector<std::vector<SuperInstance>> clusters;

  /// Instance -> cluster index.
  std::vector<std::size_t> labels(std::size_t instance_count) const;
  std::size_t cluster_count() const noexcept { return clusters.size(); }
  bool operator==(const Clustering&) const = default;
};

nlohmann::json to_json(const Clustering& clustering);

enum class Termination { BudgetExhausted, Converged, Aborted };
std::string_view to_string(Termination t);

struct RunResult {
  Clustering clustering;
  std::vector<Constraint> log;
  /// snapshots[q] = best-known instance labels after the q-th answer (q = 0 .. queries_used).
  std::vector<std::vector<std::size_t>> snapshots;
  std::size_t queries_used = 0;
  Termination termination = Termination::BudgetExhausted;
};

/// Shared, read-only inputs of a run. Building it computes the DTW matrix and affinity
/// for the DtwSpectral refiner; several runs (e.g. cross-validation folds) can share one.
class Workspace {
public:
  Workspace(const Dataset& ds, const EngineConfig& config,
            std::shared_ptr<const DistanceMatrix> precomputed = nullptr);

  const Dataset& dataset() const noexcept { return dataset_; }
  /// z-normalized copies; used for SBD.
  std::span<const TimeSeries> normalized() const noexcept { return normalized_.series(); }
  Refiner refiner() const noexcept { return refiner_; }
  const DistanceMatrix& dtw() const;
  const AffinityMatrix& affinity() const;
  std::shared_ptr<const DistanceMatrix> dtw_ptr() const noexcept { return dtw_; }

private:
  Dataset dataset_;
  Dataset normalized_;
  Refiner refiner_;
  std::shared_ptr<const DistanceMatrix> dtw_;
  std::shared_ptr<const AffinityMatrix> affinity_;
};

/// The engine gave up because the oracle aborted.
class Aborted : public Error {
public:
  Aborted() : Error("session aborted by the oracle") {}
};

/// Oracle inconsistency during a run; carries the constraint log at failure.
class SessionError : public Error {
public:
  SessionError(const InconsistencyError& cause, std::vector<Constraint> log)
      : Error(cause.what()), chain_(cause.chain()), log_(std::move(log)) {}
  const std::vector<Constraint>& chain() const noexcept { return chain_; }
  const std::vector<Constraint>& log() const noexcept { return log_; }

private:
  std::vector<Constraint> chain_;
  std::vector<Constraint> log_;
};

/// Active semi-supervised clustering by iterative super-instance refinement.
///
/// State is a three-level hierarchy: instances in super-instances in clusters. Each
/// iteration takes the largest splittable super-instance out of its cluster, probes the
/// oracle to pick a split level, refines it with the configured refiner, puts every child
/// in its own cluster, and then queries representatives until every pairwise cluster
/// relation is known. Only training instances are ever representatives, so only they are
/// ever queried.
class Engine {
public:
  Engine(std::shared_ptr<const Workspace> workspace, EngineConfig config, std::vector<bool> train_mask);

  /// Runs to budget exhaustion, convergence or abort. Oracle inconsistency -> SessionError.
  RunResult run(Oracle& oracle);

  /// Medoid of `train_members` under DTW, or the member closest to their SBD centroid.
  std::size_t representative_of(std::span<const std::size_t> train_members) const;
  SuperInstance make_super_instance(std::vector<std::size_t> members) const;

  /// Probe splits to choose k in [2, |members|]. Throws BudgetExhausted / Aborted.
  std::size_t determine_split_level(const SuperInstance& si, Oracle& oracle);
  /// Partition `si` into at most k children, each with a training member. May return a
  /// single child when the refiner puts all training members together.
  std::vector<SuperInstance> refine(const SuperInstance& si, std::size_t k);
  /// Queries until all pairwise cluster relations are known; merges eagerly on must-link.
  /// Returns false if the budget ran out first. Throws Aborted.
  bool determine_relations(Oracle& oracle);
  /// Current live clustering (not necessarily fully resolved).
  Clustering assemble_clustering() const;

  /// Distance between two instances under the active measure (DTW or SBD).
  double instance_distance(std::size_t a, std::size_t b) const;

  const ConstraintStore& constraints() const noexcept { return store_; }
  /// Replace the live state; intended for tests and resumption.
  void set_state(const Clustering& clustering);
  const EngineConfig& config() const noexcept { return config_; }

  /// Called with every new snapshot (query count, best-known clustering).
  std::function<void(std::size_t, const Clustering&)> on_snapshot;

  /// Session-file view: config, super-instances, clusters, constraint log, rng state.
  nlohmann::json state_json() const;

private:
  using Cluster = std::vector<std::size_t>;  // super-instance ids

  Relation ask(std::size_t a, std::size_t b, Oracle& oracle);
  std::vector<std::vector<std::size_t>> partition(std::span<const std::size_t> members, std::size_t k);
  std::optional<std::size_t> pick_split_target() const;
  std::size_t add_super_instance(SuperInstance si);
  double cluster_distance(const Cluster& a, const Cluster& b, std::size_t& rep_a, std::size_t& rep_b) const;
  Relation cluster_relation(const Cluster& a, const Cluster& b) const;
  void publish_valid();
  void canonicalize(Clustering& c) const;

  std::shared_ptr<const Workspace> ws_;
  EngineConfig config_;
  std::vector<bool> train_;
  ConstraintStore store_;
  std::mt19937_64 rng_;

  std::vector<SuperInstance> super_instances_;  // indexed by id; dead ones are not in clusters_
  std::vector<Cluster> clusters_;
  Clustering last_valid_;
  std::vector<std::vector<std::size_t>> snapshots_;
};

/// Convenience: build a workspace and run once.
RunResult run(const Dataset& ds, const EngineConfig& config, Oracle& oracle, std::vector<bool> train_mask);

}  // namespace cobras
