#include "cobras_ts/constraints.hpp"

#include <charconv>
#include <deque>
#include <numeric>
#include <sstream>

namespace cobras {

std::string_view to_string(Relation r) {
  switch (r) {
    case Relation::MustLink: return "must_link";
    case Relation::CannotLink: return "cannot_link";
    default: return "unknown";
  }
}

std::string_view to_string(Origin o) { return o == Origin::Queried ? "queried" : "derived"; }

Relation parse_relation(std::string_view text) {
  if (text == "must_link" || text == "ml" || text == "must-link") return Relation::MustLink;
  if (text == "cannot_link" || text == "cl" || text == "cannot-link") return Relation::CannotLink;
  throw PreconditionError("unknown relation '" + std::string(text) + "'");
}

ConstraintStore::ConstraintStore(std::size_t instance_count, std::size_t budget)
    : parent_(instance_count), size_(instance_count, 1), budget_(budget) {
  if (budget == 0) throw PreconditionError("query budget must be positive");
  std::iota(parent_.begin(), parent_.end(), 0);
}

void ConstraintStore::check_index(std::size_t i) const {
  if (i >= parent_.size()) throw PreconditionError("instance index " + std::to_string(i) + " out of range");
}

std::size_t ConstraintStore::component_of(std::size_t i) const {
  check_index(i);
  while (parent_[i] != i) i = parent_[i];
  return i;
}

std::size_t ConstraintStore::find_compress(std::size_t i) {
  std::size_t root = component_of(i);
  while (parent_[i] != root) {
    const std::size_t next = parent_[i];
    parent_[i] = root;
    i = next;
  }
  return root;
}

bool ConstraintStore::cannot_link_components(std::size_t root_a, std::size_t root_b) const {
  auto it = cl_.find(root_a);
  return it != cl_.end() && it->second.count(root_b) != 0;
}

Relation ConstraintStore::relation_of(std::size_t i, std::size_t j) const {
  const std::size_t a = component_of(i);
  const std::size_t b = component_of(j);
  if (a == b) return Relation::MustLink;
  if (cannot_link_components(a, b)) return Relation::CannotLink;
  return Relation::Unknown;
}

std::vector<Constraint> ConstraintStore::must_link_path(std::size_t from, std::size_t to) const {
  // BFS over recorded must-link edges.
  std::map<std::size_t, std::vector<const Constraint*>> adj;
  for (const auto& c : log_) {
    if (c.kind != Relation::MustLink) continue;
    adj[c.i].push_back(&c);
    adj[c.j].push_back(&c);
  }
  std::map<std::size_t, const Constraint*> via;
  std::deque<std::size_t> queue{from};
  via[from] = nullptr;
  while (!queue.empty()) {
    const std::size_t cur = queue.front();
    queue.pop_front();
    if (cur == to) break;
    for (const Constraint* c : adj[cur]) {
      const std::size_t next = c->i == cur ? c->j : c->i;
      if (via.count(next)) continue;
      via[next] = c;
      queue.push_back(next);
    }
  }
  std::vector<Constraint> path;
  if (!via.count(to)) return path;
  for (std::size_t cur = to; via[cur] != nullptr;) {
    const Constraint* c = via[cur];
    path.push_back(*c);
    cur = c->i == cur ? c->j : c->i;
  }
  return {path.rbegin(), path.rend()};
}

std::vector<Constraint> ConstraintStore::conflict_chain(std::size_t i, std::size_t j, Relation derivable) const {
  if (derivable == Relation::MustLink) return must_link_path(i, j);

  const std::size_t ri = component_of(i);
  const std::size_t rj = component_of(j);
  for (const auto& c : log_) {
    if (c.kind != Relation::CannotLink) continue;
    std::size_t near = c.i, far = c.j;
    if (component_of(near) != ri) std::swap(near, far);
    if (component_of(near) != ri || component_of(far) != rj) continue;
    auto chain = must_link_path(i, near);
    chain.push_back(c);
    for (const auto& step : must_link_path(far, j)) chain.push_back(step);
    return chain;
  }
  return {};
}

const Constraint& ConstraintStore::record(std::size_t i, std::size_t j, Relation kind, Origin origin) {
  check_index(i);
  check_index(j);
  if (i == j) throw PreconditionError("a constraint needs two distinct instances");
  if (kind == Relation::Unknown) throw PreconditionError("cannot record an unknown relation");

  const Relation known = relation_of(i, j);
  if (known == kind)
    throw PreconditionError("relation between " + std::to_string(i) + " and " + std::to_string(j) +
                            " is already derivable");
  if (known != Relation::Unknown)
    throw InconsistencyError("recording " + std::string(to_string(kind)) + "(" + std::to_string(i) + ", " +
                                 std::to_string(j) + ") contradicts the derivable " +
                                 std::string(to_string(known)),
                             conflict_chain(i, j, known));
  if (origin == Origin::Queried && queries_used_ >= budget_) throw BudgetExhausted();

  std::size_t a = find_compress(i);
  std::size_t b = find_compress(j);
  if (kind == Relation::MustLink) {
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    if (auto it = cl_.find(b); it != cl_.end()) {
      for (std::size_t other : it->second) {
        cl_[other].erase(b);
        cl_[other].insert(a);
        cl_[a].insert(other);
      }
      cl_.erase(it);
    }
  } else {
    cl_[a].insert(b);
    cl_[b].insert(a);
  }

  if (origin == Origin::Queried) ++queries_used_;
  constrained_.insert(i);
  constrained_.insert(j);
  log_.push_back(Constraint{std::min(i, j), std::max(i, j), kind, origin, log_.size() + 1});
  return log_.back();
}

std::string ConstraintStore::log_csv() const { return constraint_log_csv(log_); }

std::string constraint_log_csv(std::span<const Constraint> log) {
  std::ostringstream out;
  out << "i,j,kind,origin,sequence_number\n";
  for (const auto& c : log)
    out << c.i << ',' << c.j << ',' << to_string(c.kind) << ',' << to_string(c.origin) << ','
        << c.sequence_number << '\n';
  return out.str();
}

std::vector<Constraint> ConstraintStore::parse_log_csv(std::string_view text) {
  std::vector<Constraint> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  auto to_index = [&](const std::string& tok, std::size_t col) {
    std::size_t v = 0;
    auto [end, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || end != tok.data() + tok.size())
      throw ParseError("expected a non-negative integer, got '" + tok + "'", line_no, col);
    return v;
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.rfind("i,", 0) == 0) continue;
    std::vector<std::string> tok;
    std::istringstream fields(line);
    for (std::string f; std::getline(fields, f, ',');) tok.push_back(f);
    if (tok.size() != 5) throw ParseError("constraint log rows have 5 fields", line_no);
    Constraint c;
    c.i = to_index(tok[0], 1);
    c.j = to_index(tok[1], 2);
    try {
      c.kind = parse_relation(tok[2]);
    } catch (const PreconditionError&) {
      throw ParseError("unknown relation '" + tok[2] + "'", line_no, 3);
    }
    if (tok[3] == "queried") c.origin = Origin::Queried;
    else if (tok[3] == "derived") c.origin = Origin::Derived;
    else throw ParseError("unknown origin '" + tok[3] + "'", line_no, 4);
    c.sequence_number = to_index(tok[4], 5);
    out.push_back(c);
  }
  return out;
}

}  // namespace cobras
