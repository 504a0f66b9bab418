#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cobras_ts/error.hpp"

namespace cobras {

enum class Relation { MustLink, CannotLink, Unknown };
enum class Origin { Queried, Derived };

std::string_view to_string(Relation r);
std::string_view to_string(Origin o);
Relation parse_relation(std::string_view text);

struct Constraint {
  std::size_t i = 0;  ///< always < j
  std::size_t j = 0;
  Relation kind = Relation::MustLink;
  Origin origin = Origin::Queried;
  std::size_t sequence_number = 0;

  bool operator==(const Constraint&) const = default;
};

/// Recording a constraint that contradicts what the store already entails.
/// `chain` holds the recorded constraints that entail the opposite relation.
class InconsistencyError : public Error {
public:
  InconsistencyError(const std::string& what, std::vector<Constraint> chain)
      : Error(what), chain_(std::move(chain)) {}
  const std::vector<Constraint>& chain() const noexcept { return chain_; }

private:
  std::vector<Constraint> chain_;
};

/// A query was attempted with no budget left.
class BudgetExhausted : public Error {
public:
  BudgetExhausted() : Error("query budget exhausted") {}
};

/// Must-link / cannot-link store closed under ML transitivity and
/// ML(a,b) & CL(b,c) => CL(a,c). Must-link components live in a union-find; cannot-link
/// edges are kept between component roots and re-homed on union.
class ConstraintStore {
public:
  ConstraintStore(std::size_t instance_count, std::size_t budget);

  std::size_t instance_count() const noexcept { return parent_.size(); }
  std::size_t budget() const noexcept { return budget_; }
  std::size_t queries_used() const noexcept { return queries_used_; }
  std::size_t budget_remaining() const noexcept { return budget_ - queries_used_; }

  Relation relation_of(std::size_t i, std::size_t j) const;

  /// Requires relation_of(i, j) == Unknown: re-recording a derivable relation throws
  /// PreconditionError, recording its opposite throws InconsistencyError. Queried
  /// constraints consume budget (BudgetExhausted when none is left).
  const Constraint& record(std::size_t i, std::size_t j, Relation kind, Origin origin = Origin::Queried);

  const std::vector<Constraint>& log() const noexcept { return log_; }

  /// Root of i's must-link component.
  std::size_t component_of(std::size_t i) const;
  bool cannot_link_components(std::size_t root_a, std::size_t root_b) const;
  /// Instances that appear in at least one recorded constraint.
  const std::set<std::size_t>& constrained_instances() const noexcept { return constrained_; }

  /// Header `i,j,kind,origin,sequence_number`, one row per recorded constraint.
  std::string log_csv() const;
  static std::vector<Constraint> parse_log_csv(std::string_view text);

private:
  void check_index(std::size_t i) const;
  std::size_t find_compress(std::size_t i);
  std::vector<Constraint> must_link_path(std::size_t from, std::size_t to) const;
  std::vector<Constraint> conflict_chain(std::size_t i, std::size_t j, Relation derivable) const;

  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
  std::map<std::size_t, std::set<std::size_t>> cl_;  // root -> roots it cannot link with
  std::set<std::size_t> constrained_;
  std::vector<Constraint> log_;
  std::size_t budget_;
  std::size_t queries_used_ = 0;
};

/// Same format as ConstraintStore::log_csv.
std::string constraint_log_csv(std::span<const Constraint> log);

}  // namespace cobras
