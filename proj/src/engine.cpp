#include "cobras_ts/engine.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "cobras_ts/shape.hpp"
#include "cobras_ts/spectral.hpp"

namespace cobras {

std::string_view to_string(Refiner r) { return r == Refiner::DtwSpectral ? "dtw-spectral" : "kshape"; }

Refiner parse_refiner(std::string_view text) {
  if (text == "dtw-spectral" || text == "dtw") return Refiner::DtwSpectral;
  if (text == "kshape" || text == "k-shape") return Refiner::KShape;
  throw PreconditionError("unknown refiner '" + std::string(text) + "'");
}

std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::BudgetExhausted: return "budget_exhausted";
    case Termination::Converged: return "converged";
    default: return "aborted";
  }
}

void EngineConfig::validate() const {
  if (!(gamma > 0.0)) throw PreconditionError("gamma must be positive");
  if (budget < 1) throw PreconditionError("budget must be at least 1");
  if (kmeans_restarts < 1) throw PreconditionError("kmeans_restarts must be at least 1");
}

nlohmann::json to_json(const EngineConfig& c) {
  return {{"refiner", to_string(c.refiner)},
          {"window", c.window.to_string()},
          {"gamma", c.gamma},
          {"budget", c.budget},
          {"seed", c.rng_seed},
          {"normalize", c.normalize},
          {"kmeans_restarts", c.kmeans_restarts},
          {"kshape_max_iter", c.kshape_max_iter}};
}

EngineConfig config_from_json(const nlohmann::json& j, EngineConfig c) {
  if (!j.is_object()) throw PreconditionError("config must be a JSON object");
  if (j.contains("refiner")) c.refiner = parse_refiner(j.at("refiner").get<std::string>());
  if (j.contains("window")) {
    const auto& w = j.at("window");
    c.window = w.is_string() ? WarpingWindow::parse(w.get<std::string>()) : WarpingWindow::fraction(w.get<double>());
  }
  if (j.contains("gamma")) c.gamma = j.at("gamma").get<double>();
  if (j.contains("budget")) c.budget = j.at("budget").get<std::size_t>();
  if (j.contains("seed")) c.rng_seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("normalize")) c.normalize = j.at("normalize").get<bool>();
  if (j.contains("kmeans_restarts")) c.kmeans_restarts = j.at("kmeans_restarts").get<std::size_t>();
  if (j.contains("kshape_max_iter")) c.kshape_max_iter = j.at("kshape_max_iter").get<std::size_t>();
  c.validate();
  return c;
}

std::vector<std::size_t> Clustering::labels(std::size_t instance_count) const {
  std::vector<std::size_t> out(instance_count, 0);
  for (std::size_t c = 0; c < clusters.size(); ++c)
    for (const auto& si : clusters[c])
      for (auto m : si.members) out[m] = c;
  return out;
}

nlohmann::json to_json(const Clustering& clustering) {
  auto clusters = nlohmann::json::array();
  for (const auto& cluster : clustering.clusters) {
    auto sis = nlohmann::json::array();
    for (const auto& si : cluster)
      sis.push_back({{"members", si.members},
                     {"train_members", si.train_members},
                     {"representative", si.representative},
                     {"tried_splitting", si.tried_splitting}});
    clusters.push_back({{"super_instances", sis}});
  }
  return clusters;
}

// ---------------------------------------------------------------------------

Workspace::Workspace(const Dataset& ds, const EngineConfig& config, std::shared_ptr<const DistanceMatrix> precomputed)
    : dataset_(ds), normalized_(ds.z_normalized()), refiner_(config.refiner) {
  config.validate();
  if (ds.size() < 2) throw PreconditionError("clustering needs at least two series");
  if (refiner_ == Refiner::DtwSpectral) {
    if (precomputed) {
      if (precomputed->size() != ds.size()) throw PreconditionError("precomputed matrix does not match dataset");
      dtw_ = std::move(precomputed);
    } else {
      dtw_ = std::make_shared<DistanceMatrix>(distance_matrix(config.normalize ? normalized_ : dataset_, config.window));
    }
    affinity_ = std::make_shared<AffinityMatrix>(*dtw_, config.gamma);
  }
}

const DistanceMatrix& Workspace::dtw() const {
  if (!dtw_) throw PreconditionError("workspace has no DTW matrix (k-Shape refiner)");
  return *dtw_;
}

const AffinityMatrix& Workspace::affinity() const {
  if (!affinity_) throw PreconditionError("workspace has no affinity matrix (k-Shape refiner)");
  return *affinity_;
}

// ---------------------------------------------------------------------------

Engine::Engine(std::shared_ptr<const Workspace> workspace, EngineConfig config, std::vector<bool> train_mask)
    : ws_(std::move(workspace)),
      config_(config),
      train_(std::move(train_mask)),
      store_(ws_->dataset().size(), config.budget),
      rng_(config.rng_seed) {
  config_.validate();
  if (config_.refiner != ws_->refiner()) throw PreconditionError("workspace was built for another refiner");
  const std::size_t n = ws_->dataset().size();
  if (train_.size() != n) throw PreconditionError("train mask size does not match dataset");
  if (std::none_of(train_.begin(), train_.end(), [](bool b) { return b; }))
    throw PreconditionError("train mask selects no instance");

  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  const std::size_t id = add_super_instance(make_super_instance(std::move(all)));
  clusters_.push_back({id});
  last_valid_ = assemble_clustering();
  snapshots_.push_back(last_valid_.labels(n));
}

std::size_t Engine::representative_of(std::span<const std::size_t> train_members) const {
  if (train_members.empty()) throw PreconditionError("representative needs at least one training member");
  std::vector<std::size_t> sorted(train_members.begin(), train_members.end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted.size() == 1) return sorted.front();

  if (config_.refiner == Refiner::KShape) return shape::sbd_representative(sorted, ws_->normalized());

  const auto& d = ws_->dtw();
  std::size_t best = sorted.front();
  double best_sum = std::numeric_limits<double>::infinity();
  for (auto i : sorted) {
    double sum = 0.0;
    for (auto j : sorted) sum += d(i, j);
    if (sum < best_sum) {
      best_sum = sum;
      best = i;
    }
  }
  return best;
}

SuperInstance Engine::make_super_instance(std::vector<std::size_t> members) const {
  SuperInstance si;
  std::sort(members.begin(), members.end());
  si.members = std::move(members);
  for (auto m : si.members)
    if (train_[m]) si.train_members.push_back(m);
  if (si.train_members.empty()) throw PreconditionError("super-instance without training members");
  si.representative = representative_of(si.train_members);
  return si;
}

std::size_t Engine::add_super_instance(SuperInstance si) {
  super_instances_.push_back(std::move(si));
  return super_instances_.size() - 1;
}

double Engine::instance_distance(std::size_t a, std::size_t b) const {
  if (a == b) return 0.0;
  if (config_.refiner == Refiner::DtwSpectral) return ws_->dtw()(a, b);
  const auto series = ws_->normalized();
  return shape::sbd_or_one(series[a].values(), series[b].values());
}

Relation Engine::ask(std::size_t a, std::size_t b, Oracle& oracle) {
  const Relation known = store_.relation_of(a, b);
  if (known != Relation::Unknown) return known;
  if (store_.budget_remaining() == 0) throw BudgetExhausted();

  const std::size_t lo = std::min(a, b), hi = std::max(a, b);
  const Answer answer = oracle.query(lo, hi);
  if (answer == Answer::Abort) throw Aborted();
  const Relation kind = answer == Answer::MustLink ? Relation::MustLink : Relation::CannotLink;
  store_.record(lo, hi, kind, Origin::Queried);

  snapshots_.push_back(last_valid_.labels(ws_->dataset().size()));
  if (on_snapshot) on_snapshot(store_.queries_used(), last_valid_);
  return kind;
}

std::vector<std::vector<std::size_t>> Engine::partition(std::span<const std::size_t> members, std::size_t k) {
  const std::uint64_t seed = rng_();
  std::vector<std::size_t> assignment;
  if (config_.refiner == Refiner::DtwSpectral) {
    spectral::SpectralParams params;
    params.k = k;
    params.kmeans_restarts = config_.kmeans_restarts;
    params.rng_seed = seed;
    assignment = spectral::spectral_cluster(ws_->affinity(), members, params);
  } else {
    const auto all = ws_->normalized();
    std::vector<TimeSeries> subset;
    subset.reserve(members.size());
    for (auto m : members) subset.push_back(all[m]);
    assignment = shape::kshape(std::span<const TimeSeries>(subset), {k, seed, config_.kshape_max_iter}).assignment;
  }

  std::vector<std::vector<std::size_t>> groups(k);
  for (std::size_t p = 0; p < members.size(); ++p) groups[assignment[p]].push_back(members[p]);
  std::erase_if(groups, [](const auto& g) { return g.empty(); });
  return groups;
}

std::vector<SuperInstance> Engine::refine(const SuperInstance& si, std::size_t k) {
  if (k < 2 || k > si.members.size()) throw PreconditionError("refine needs 2 <= k <= |members|");
  auto groups = partition(si.members, k);

  std::vector<SuperInstance> children;
  std::vector<std::vector<std::size_t>> untrained;
  for (auto& g : groups) {
    if (std::any_of(g.begin(), g.end(), [&](std::size_t m) { return train_[m]; }))
      children.push_back(make_super_instance(std::move(g)));
    else
      untrained.push_back(std::move(g));
  }

  for (auto& g : untrained) {
    // The group's own medoid stands in for it when looking for the nearest sibling.
    const std::size_t center = representative_of(g);
    std::size_t target = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < children.size(); ++c) {
      const double d = instance_distance(center, children[c].representative);
      if (d < best) {
        best = d;
        target = c;
      }
    }
    auto& dst = children[target].members;
    dst.insert(dst.end(), g.begin(), g.end());
    std::sort(dst.begin(), dst.end());
  }
  return children;
}

std::size_t Engine::determine_split_level(const SuperInstance& si, Oracle& oracle) {
  if (si.members.size() < 2) throw PreconditionError("cannot split a singleton super-instance");
  std::size_t cannot_links = 0;
  SuperInstance current = si;
  while (current.members.size() >= 2) {
    auto halves = refine(current, 2);
    if (halves.size() < 2) break;
    if (ask(halves[0].representative, halves[1].representative, oracle) == Relation::MustLink) break;
    ++cannot_links;

    const SuperInstance* next = nullptr;
    for (const auto& h : halves) {
      if (h.train_members.size() < 2) continue;
      if (!next || h.members.size() > next->members.size() ||
          (h.members.size() == next->members.size() && h.representative < next->representative))
        next = &h;
    }
    if (!next) break;
    current = *next;
  }
  const std::size_t exponent = std::max<std::size_t>(cannot_links, 1);
  const std::size_t k = exponent >= 63 ? std::numeric_limits<std::size_t>::max() : std::size_t{1} << exponent;
  return std::min(k, si.members.size());
}

double Engine::cluster_distance(const Cluster& a, const Cluster& b, std::size_t& rep_a, std::size_t& rep_b) const {
  double best = std::numeric_limits<double>::infinity();
  for (auto sa : a)
    for (auto sb : b) {
      const std::size_t ra = super_instances_[sa].representative;
      const std::size_t rb = super_instances_[sb].representative;
      const double d = instance_distance(ra, rb);
      if (d < best) {
        best = d;
        rep_a = ra;
        rep_b = rb;
      }
    }
  return best;
}

bool Engine::determine_relations(Oracle& oracle) {
  while (true) {
    // Must-link roots of the representatives of each cluster.
    std::vector<std::set<std::size_t>> roots(clusters_.size());
    for (std::size_t c = 0; c < clusters_.size(); ++c)
      for (auto sid : clusters_[c]) roots[c].insert(store_.component_of(super_instances_[sid].representative));

    auto relation = [&](std::size_t a, std::size_t b) {
      bool shared = false;
      for (auto ra : roots[a])
        for (auto rb : roots[b]) {
          if (store_.cannot_link_components(ra, rb)) return Relation::CannotLink;
          if (ra == rb) shared = true;
        }
      return shared ? Relation::MustLink : Relation::Unknown;
    };

    bool merged = false;
    double best = std::numeric_limits<double>::infinity();
    std::size_t query_a = 0, query_b = 0, pair_a = 0, pair_b = 0;
    for (std::size_t a = 0; a < clusters_.size() && !merged; ++a) {
      for (std::size_t b = a + 1; b < clusters_.size(); ++b) {
        const Relation r = relation(a, b);
        if (r == Relation::MustLink) {
          clusters_[a].insert(clusters_[a].end(), clusters_[b].begin(), clusters_[b].end());
          clusters_.erase(clusters_.begin() + static_cast<std::ptrdiff_t>(b));
          merged = true;
          break;
        }
        if (r == Relation::CannotLink) continue;
        std::size_t ra = 0, rb = 0;
        const double d = cluster_distance(clusters_[a], clusters_[b], ra, rb);
        if (d < best) {
          best = d;
          query_a = ra;
          query_b = rb;
          pair_a = a;
          pair_b = b;
        }
      }
    }
    if (merged) continue;
    if (best == std::numeric_limits<double>::infinity()) return true;

    Relation answer;
    try {
      answer = ask(query_a, query_b, oracle);
    } catch (const BudgetExhausted&) {
      return false;
    }
    if (answer == Relation::MustLink) {
      clusters_[pair_a].insert(clusters_[pair_a].end(), clusters_[pair_b].begin(), clusters_[pair_b].end());
      clusters_.erase(clusters_.begin() + static_cast<std::ptrdiff_t>(pair_b));
    }
  }
}

std::optional<std::size_t> Engine::pick_split_target() const {
  std::optional<std::size_t> best;
  for (const auto& cluster : clusters_)
    for (auto sid : cluster) {
      const auto& si = super_instances_[sid];
      if (si.tried_splitting || si.members.size() < 2 || si.train_members.size() < 2) continue;
      if (!best) {
        best = sid;
        continue;
      }
      const auto& cur = super_instances_[*best];
      if (si.members.size() > cur.members.size() ||
          (si.members.size() == cur.members.size() && si.representative < cur.representative))
        best = sid;
    }
  return best;
}

void Engine::canonicalize(Clustering& c) const {
  for (auto& cluster : c.clusters)
    std::sort(cluster.begin(), cluster.end(),
              [](const SuperInstance& a, const SuperInstance& b) { return a.members.front() < b.members.front(); });
  std::sort(c.clusters.begin(), c.clusters.end(), [](const auto& a, const auto& b) {
    return a.front().members.front() < b.front().members.front();
  });
}

Clustering Engine::assemble_clustering() const {
  Clustering out;
  for (const auto& cluster : clusters_) {
    if (cluster.empty()) continue;
    std::vector<SuperInstance> sis;
    for (auto sid : cluster) sis.push_back(super_instances_[sid]);
    out.clusters.push_back(std::move(sis));
  }
  canonicalize(out);
  return out;
}

void Engine::publish_valid() {
  last_valid_ = assemble_clustering();
  snapshots_.back() = last_valid_.labels(ws_->dataset().size());
  if (on_snapshot) on_snapshot(store_.queries_used(), last_valid_);
}

void Engine::set_state(const Clustering& clustering) {
  const std::size_t n = ws_->dataset().size();
  std::vector<int> seen(n, 0);
  super_instances_.clear();
  clusters_.clear();
  for (const auto& cluster : clustering.clusters) {
    if (cluster.empty()) throw PreconditionError("clusters must be non-empty");
    Cluster ids;
    for (const auto& si : cluster) {
      for (auto m : si.members) {
        if (m >= n) throw PreconditionError("member index out of range");
        ++seen[m];
      }
      if (std::find(si.train_members.begin(), si.train_members.end(), si.representative) == si.train_members.end())
        throw PreconditionError("representative must be a training member");
      ids.push_back(add_super_instance(si));
    }
    clusters_.push_back(std::move(ids));
  }
  if (std::any_of(seen.begin(), seen.end(), [](int s) { return s != 1; }))
    throw PreconditionError("super-instances must partition the dataset");
  last_valid_ = assemble_clustering();
  snapshots_.back() = last_valid_.labels(n);
}

RunResult Engine::run(Oracle& oracle) {
  RunResult result;
  result.termination = Termination::Converged;
  try {
    while (true) {
      if (store_.budget_remaining() == 0) {
        result.termination = Termination::BudgetExhausted;
        break;
      }
      const auto target = pick_split_target();
      if (!target) break;

      const auto saved = clusters_;
      for (auto& cluster : clusters_) std::erase(cluster, *target);
      std::erase_if(clusters_, [](const Cluster& c) { return c.empty(); });

      const SuperInstance si = super_instances_[*target];
      const std::size_t k = determine_split_level(si, oracle);
      auto children = refine(si, k);
      if (children.size() < 2) {
        clusters_ = saved;
        super_instances_[*target].tried_splitting = true;
        continue;
      }
      for (auto& child : children) clusters_.push_back({add_super_instance(std::move(child))});

      if (!determine_relations(oracle)) {
        result.termination = Termination::BudgetExhausted;
        break;
      }
      publish_valid();
    }
  } catch (const BudgetExhausted&) {
    result.termination = Termination::BudgetExhausted;
  } catch (const Aborted&) {
    result.termination = Termination::Aborted;
  } catch (const InconsistencyError& e) {
    throw SessionError(e, store_.log());
  }

  result.clustering = last_valid_;
  result.log = store_.log();
  result.snapshots = snapshots_;
  result.queries_used = store_.queries_used();
  return result;
}

nlohmann::json Engine::state_json() const {
  auto sis = nlohmann::json::array();
  std::map<std::size_t, std::size_t> live_index;
  for (const auto& cluster : clusters_)
    for (auto sid : cluster) {
      live_index[sid] = sis.size();
      const auto& si = super_instances_[sid];
      sis.push_back({{"members", si.members},
                     {"train_members", si.train_members},
                     {"representative", si.representative},
                     {"tried_splitting", si.tried_splitting}});
    }
  auto clusters = nlohmann::json::array();
  for (const auto& cluster : clusters_) {
    auto ids = nlohmann::json::array();
    for (auto sid : cluster) ids.push_back(live_index[sid]);
    clusters.push_back(ids);
  }
  auto log = nlohmann::json::array();
  for (const auto& c : store_.log())
    log.push_back({{"i", c.i},
                   {"j", c.j},
                   {"kind", to_string(c.kind)},
                   {"origin", to_string(c.origin)},
                   {"sequence_number", c.sequence_number}});
  std::ostringstream rng_state;
  rng_state << rng_;
  return {{"config", to_json(config_)},
          {"super_instances", sis},
          {"clusters", clusters},
          {"constraint_log", log},
          {"queries_used", store_.queries_used()},
          {"rng_state", rng_state.str()}};
}

RunResult run(const Dataset& ds, const EngineConfig& config, Oracle& oracle, std::vector<bool> train_mask) {
  auto ws = std::make_shared<const Workspace>(ds, config);
  Engine engine(ws, config, std::move(train_mask));
  return engine.run(oracle);
}

}  // namespace cobras
