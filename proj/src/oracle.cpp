#include "cobras_ts/oracle.hpp"

#include <algorithm>

namespace cobras {

Answer LabelOracle::query(std::size_t i, std::size_t j) {
  if (i >= labels_.size() || j >= labels_.size())
    throw PreconditionError("label oracle has no label for the queried instance");
  return labels_[i] == labels_[j] ? Answer::MustLink : Answer::CannotLink;
}

ReplayOracle::ReplayOracle(std::vector<Constraint> log, Oracle* fallback) : fallback_(fallback) {
  std::copy_if(log.begin(), log.end(), std::back_inserter(log_),
               [](const Constraint& c) { return c.origin == Origin::Queried; });
}

Answer ReplayOracle::query(std::size_t i, std::size_t j) {
  if (next_ >= log_.size()) return fallback_ ? fallback_->query(i, j) : Answer::Abort;
  const Constraint& c = log_[next_];
  if (c.i != std::min(i, j) || c.j != std::max(i, j))
    throw Error("replay diverged at query " + std::to_string(next_ + 1) + ": expected (" + std::to_string(c.i) +
                ", " + std::to_string(c.j) + "), engine asked (" + std::to_string(i) + ", " + std::to_string(j) +
                ")");
  ++next_;
  return c.kind == Relation::MustLink ? Answer::MustLink : Answer::CannotLink;
}

HumanOracle::HumanOracle(std::chrono::milliseconds timeout) : timeout_(timeout) {}

Answer HumanOracle::query(std::size_t i, std::size_t j) {
  std::unique_lock lock(mutex_);
  if (closed_) return Answer::Abort;
  pending_ = std::make_pair(i, j);
  answer_.reset();
  cv_.notify_all();

  const auto asked = std::chrono::steady_clock::now();
  auto ready = [&] { return closed_ || answer_.has_value(); };
  if (timeout_.count() > 0) {
    if (!cv_.wait_for(lock, timeout_, ready)) closed_ = true;
  } else {
    cv_.wait(lock, ready);
  }
  pending_.reset();
  if (closed_ && !answer_) {
    cv_.notify_all();
    return Answer::Abort;
  }

  const Answer a = *answer_;
  answer_.reset();
  records_.push_back(QueryRecord{
      i, j, a, records_.size() + 1,
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - asked)});
  cv_.notify_all();
  return a;
}

std::optional<std::pair<std::size_t, std::size_t>> HumanOracle::pending() const {
  std::lock_guard lock(mutex_);
  if (answer_) return std::nullopt;
  return pending_;
}

bool HumanOracle::answer(Relation relation) {
  if (relation == Relation::Unknown) throw PreconditionError("an answer must be must-link or cannot-link");
  std::lock_guard lock(mutex_);
  if (!pending_ || answer_ || closed_) return false;
  answer_ = relation == Relation::MustLink ? Answer::MustLink : Answer::CannotLink;
  cv_.notify_all();
  return true;
}

void HumanOracle::close() {
  std::lock_guard lock(mutex_);
  closed_ = true;
  cv_.notify_all();
}

bool HumanOracle::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

bool HumanOracle::wait_for_pending(std::chrono::milliseconds timeout, const std::function<bool()>& done) const {
  std::unique_lock lock(mutex_);
  cv_.wait_for(lock, timeout, [&] { return (pending_ && !answer_) || closed_ || (done && done()); });
  return pending_.has_value() && !answer_;
}

void HumanOracle::notify() const {
  std::lock_guard lock(mutex_);
  cv_.notify_all();
}

std::vector<QueryRecord> HumanOracle::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

}  // namespace cobras
