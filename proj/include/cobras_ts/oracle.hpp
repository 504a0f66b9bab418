#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cobras_ts/constraints.hpp"

namespace cobras {

enum class Answer { MustLink, CannotLink, Abort };

struct QueryRecord {
  std::size_t i = 0;
  std::size_t j = 0;
  Answer answer = Answer::MustLink;
  std::size_t sequence_number = 0;
  std::chrono::milliseconds latency{0};
};

/// Answers "should instances i and j be in the same cluster?".
class Oracle {
public:
  virtual ~Oracle() = default;
  virtual Answer query(std::size_t i, std::size_t j) = 0;
};

/// Ground truth from class labels: must-link iff the labels are equal.
class LabelOracle final : public Oracle {
public:
  explicit LabelOracle(std::vector<std::string> labels) : labels_(std::move(labels)) {}
  Answer query(std::size_t i, std::size_t j) override;

private:
  std::vector<std::string> labels_;
};

/// Answers from a recorded log, in order. The queried pair must match the recorded one,
/// otherwise the trajectory has diverged and an Error is thrown. When the log runs out
/// the fallback is consulted, or Abort is returned if there is none.
class ReplayOracle final : public Oracle {
public:
  explicit ReplayOracle(std::vector<Constraint> log, Oracle* fallback = nullptr);
  Answer query(std::size_t i, std::size_t j) override;

  std::size_t replayed() const noexcept { return next_; }
  bool exhausted() const noexcept { return next_ >= log_.size(); }

private:
  std::vector<Constraint> log_;  // queried entries only
  std::size_t next_ = 0;
  Oracle* fallback_;
};

/// Bridge to a person answering through another thread. The engine thread blocks in
/// query() until answer() or close() is called from elsewhere; at most one query is
/// pending at a time.
class HumanOracle final : public Oracle {
public:
  /// `timeout` of zero waits forever.
  explicit HumanOracle(std::chrono::milliseconds timeout = std::chrono::milliseconds{0});

  Answer query(std::size_t i, std::size_t j) override;

  /// The pair currently waiting for an answer.
  std::optional<std::pair<std::size_t, std::size_t>> pending() const;
  /// Delivers an answer to the pending query; false when nothing is pending.
  bool answer(Relation relation);
  /// Makes the current and all future queries return Abort.
  void close();
  bool closed() const;

  /// Blocks until a query is pending, the oracle is closed, `done()` holds, or the
  /// timeout passes. Returns true when a query is pending.
  bool wait_for_pending(std::chrono::milliseconds timeout, const std::function<bool()>& done = {}) const;
  /// Wakes waiters in wait_for_pending so they re-check `done`.
  void notify() const;

  std::vector<QueryRecord> records() const;

private:
  mutable std::mutex mutex_;
  mutable std::condition_variable cv_;
  std::chrono::milliseconds timeout_;
  std::optional<std::pair<std::size_t, std::size_t>> pending_;
  std::optional<Answer> answer_;
  bool closed_ = false;
  std::vector<QueryRecord> records_;
};

}  // namespace cobras
