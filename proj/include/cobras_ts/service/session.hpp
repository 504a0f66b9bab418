#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "cobras_ts/engine.hpp"
#include "cobras_ts/oracle.hpp"

namespace cobras::service {

enum class Phase { Running, AwaitingAnswer, Finished, Aborted, Failed };
std::string_view to_string(Phase p);

/// One interactive clustering run. The engine lives on its own thread and parks in a
/// HumanOracle whenever it needs an answer; all methods are safe to call from request
/// handler threads.
class Session {
public:
  /// `resume_log` answers are replayed before the first human query. When `file` is
  /// non-empty the session state is rewritten there after every answer.
  Session(std::string id, std::string dataset_id, Dataset dataset, EngineConfig config,
          std::vector<Constraint> resume_log = {}, std::filesystem::path file = {});
  ~Session();

  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const std::string& id() const noexcept { return id_; }
  const std::string& dataset_id() const noexcept { return dataset_id_; }
  const EngineConfig& config() const noexcept { return config_; }
  const Dataset& dataset() const noexcept { return dataset_; }

  Phase phase() const;
  std::optional<std::pair<std::size_t, std::size_t>> pending() const;

  enum class AnswerStatus { Accepted, NoPendingQuery };
  /// Hands the answer to the engine and waits (up to `wait`) until it either asks the next
  /// question or stops.
  AnswerStatus answer(Relation relation, std::chrono::milliseconds wait = std::chrono::seconds(30));

  /// Waits until a query is pending or the run has stopped; true if a query is pending.
  bool wait_until_idle(std::chrono::milliseconds timeout) const;

  /// Closes the oracle and joins the engine thread.
  void abort();

  Clustering clustering() const;
  std::vector<Constraint> log() const;
  std::size_t queries_used() const;
  std::string error() const;

  nlohmann::json file_json() const;

private:
  void run_engine(std::vector<Constraint> resume_log);
  void persist(const nlohmann::json& state) const;

  std::string id_;
  std::string dataset_id_;
  Dataset dataset_;
  EngineConfig config_;
  std::filesystem::path file_;

  HumanOracle human_;
  mutable std::mutex mutex_;
  Clustering clustering_;
  std::vector<Constraint> log_;
  std::optional<Phase> terminal_;
  std::string error_;
  std::atomic<bool> done_{false};
  std::jthread thread_;
};

/// Dataset registry plus live sessions. Datasets are UCR files in `data_dir` addressed by
/// file stem; session files go to `session_dir` (disabled when empty).
class SessionManager {
public:
  SessionManager(std::filesystem::path data_dir, std::filesystem::path session_dir = {});

  std::vector<std::string> dataset_ids() const;
  Dataset load_dataset(const std::string& dataset_id) const;
  void save_dataset(const std::string& dataset_id, std::string_view ucr_text);

  std::shared_ptr<Session> create(const std::string& dataset_id, const EngineConfig& config);
  std::shared_ptr<Session> find(const std::string& session_id) const;
  /// Aborts the session and forgets it. False when the id is unknown.
  bool remove(const std::string& session_id);

  /// Restarts every session found in `session_dir`; they resume at their pending query.
  std::size_t resume_all();

private:
  std::string next_id();

  std::filesystem::path data_dir_;
  std::filesystem::path session_dir_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::size_t counter_ = 0;
};

}  // namespace cobras::service
