#include "cobras_ts/service/session.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace cobras::service {

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::Running: return "running";
    case Phase::AwaitingAnswer: return "awaiting_answer";
    case Phase::Finished: return "finished";
    case Phase::Aborted: return "aborted";
    default: return "failed";
  }
}

namespace {

nlohmann::json log_to_json(const std::vector<Constraint>& log) {
  auto out = nlohmann::json::array();
  for (const auto& c : log)
    out.push_back({{"i", c.i},
                   {"j", c.j},
                   {"kind", to_string(c.kind)},
                   {"origin", to_string(c.origin)},
                   {"sequence_number", c.sequence_number}});
  return out;
}

std::vector<Constraint> log_from_json(const nlohmann::json& j) {
  std::vector<Constraint> out;
  for (const auto& e : j) {
    Constraint c;
    c.i = e.at("i").get<std::size_t>();
    c.j = e.at("j").get<std::size_t>();
    c.kind = parse_relation(e.at("kind").get<std::string>());
    c.origin = e.at("origin").get<std::string>() == "derived" ? Origin::Derived : Origin::Queried;
    c.sequence_number = e.at("sequence_number").get<std::size_t>();
    out.push_back(c);
  }
  return out;
}

bool valid_id(const std::string& id) {
  if (id.empty() || id.size() > 128 || id.front() == '.') return false;
  return std::all_of(id.begin(), id.end(),
                     [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.'; });
}

}  // namespace

Session::Session(std::string id, std::string dataset_id, Dataset dataset, EngineConfig config,
                 std::vector<Constraint> resume_log, std::filesystem::path file)
    : id_(std::move(id)),
      dataset_id_(std::move(dataset_id)),
      dataset_(std::move(dataset)),
      config_(config),
      file_(std::move(file)) {
  config_.validate();
  thread_ = std::jthread([this, log = std::move(resume_log)]() mutable { run_engine(std::move(log)); });
}

Session::~Session() { abort(); }

void Session::run_engine(std::vector<Constraint> resume_log) {
  try {
    auto ws = std::make_shared<const Workspace>(dataset_, config_);
    ReplayOracle replay(std::move(resume_log), &human_);
    Engine engine(ws, config_, std::vector<bool>(dataset_.size(), true));
    {
      std::lock_guard lock(mutex_);
      clustering_ = engine.assemble_clustering();
    }
    engine.on_snapshot = [&](std::size_t, const Clustering& best) {
      {
        std::lock_guard lock(mutex_);
        clustering_ = best;
        log_ = engine.constraints().log();
      }
      persist(engine.state_json());
    };

    const RunResult result = engine.run(replay);
    {
      std::lock_guard lock(mutex_);
      clustering_ = result.clustering;
      log_ = result.log;
      terminal_ = result.termination == Termination::Aborted ? Phase::Aborted : Phase::Finished;
    }
    persist(engine.state_json());
  } catch (const std::exception& e) {
    std::lock_guard lock(mutex_);
    terminal_ = Phase::Failed;
    error_ = e.what();
  }
  done_ = true;
  human_.notify();
}

void Session::persist(const nlohmann::json& state) const {
  if (file_.empty()) return;
  nlohmann::json out = file_json();
  out["engine"] = state;
  const auto tmp = std::filesystem::path(file_.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    f << out.dump(2);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, file_, ec);
}

nlohmann::json Session::file_json() const {
  std::lock_guard lock(mutex_);
  return {{"session_id", id_},
          {"dataset_id", dataset_id_},
          {"config", to_json(config_)},
          {"phase", to_string(terminal_.value_or(Phase::Running))},
          {"constraint_log", log_to_json(log_)}};
}

Phase Session::phase() const {
  std::lock_guard lock(mutex_);
  if (terminal_) return *terminal_;
  return human_.pending() ? Phase::AwaitingAnswer : Phase::Running;
}

std::optional<std::pair<std::size_t, std::size_t>> Session::pending() const { return human_.pending(); }

Session::AnswerStatus Session::answer(Relation relation, std::chrono::milliseconds wait) {
  if (!human_.answer(relation)) return AnswerStatus::NoPendingQuery;
  wait_until_idle(wait);
  return AnswerStatus::Accepted;
}

bool Session::wait_until_idle(std::chrono::milliseconds timeout) const {
  return human_.wait_for_pending(timeout, [this] { return done_.load(); });
}

void Session::abort() {
  human_.close();
  if (thread_.joinable()) thread_.join();
}

Clustering Session::clustering() const {
  std::lock_guard lock(mutex_);
  return clustering_;
}

std::vector<Constraint> Session::log() const {
  std::lock_guard lock(mutex_);
  return log_;
}

std::size_t Session::queries_used() const {
  std::lock_guard lock(mutex_);
  return static_cast<std::size_t>(
      std::count_if(log_.begin(), log_.end(), [](const Constraint& c) { return c.origin == Origin::Queried; }));
}

std::string Session::error() const {
  std::lock_guard lock(mutex_);
  return error_;
}

// ---------------------------------------------------------------------------

SessionManager::SessionManager(std::filesystem::path data_dir, std::filesystem::path session_dir)
    : data_dir_(std::move(data_dir)), session_dir_(std::move(session_dir)) {
  std::filesystem::create_directories(data_dir_);
  if (!session_dir_.empty()) std::filesystem::create_directories(session_dir_);
}

std::vector<std::string> SessionManager::dataset_ids() const {
  std::vector<std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(data_dir_))
    if (e.is_regular_file()) out.push_back(e.path().stem().string());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Dataset SessionManager::load_dataset(const std::string& dataset_id) const {
  if (!valid_id(dataset_id)) throw PreconditionError("invalid dataset id '" + dataset_id + "'");
  for (const auto& e : std::filesystem::directory_iterator(data_dir_))
    if (e.is_regular_file() && e.path().stem().string() == dataset_id) {
      auto ds = load_ucr(e.path());
      return Dataset(ds.series(), ds.labels(), dataset_id);
    }
  throw NotFound("unknown dataset '" + dataset_id + "'");
}

void SessionManager::save_dataset(const std::string& dataset_id, std::string_view ucr_text) {
  if (!valid_id(dataset_id)) throw PreconditionError("invalid dataset id '" + dataset_id + "'");
  parse_ucr(ucr_text);  // validate before storing
  std::ofstream out(data_dir_ / (dataset_id + ".txt"), std::ios::binary | std::ios::trunc);
  out << ucr_text;
}

std::string SessionManager::next_id() { return "session-" + std::to_string(++counter_); }

std::shared_ptr<Session> SessionManager::create(const std::string& dataset_id, const EngineConfig& config) {
  auto ds = load_dataset(dataset_id);
  std::lock_guard lock(mutex_);
  const std::string id = next_id();
  const auto file = session_dir_.empty() ? std::filesystem::path{} : session_dir_ / (id + ".json");
  auto session = std::make_shared<Session>(id, dataset_id, std::move(ds), config, std::vector<Constraint>{}, file);
  sessions_[id] = session;
  return session;
}

std::shared_ptr<Session> SessionManager::find(const std::string& session_id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(session_id);
  return it == sessions_.end() ? nullptr : it->second;
}

bool SessionManager::remove(const std::string& session_id) {
  std::shared_ptr<Session> session;
  {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end()) return false;
    session = it->second;
    sessions_.erase(it);
  }
  session->abort();
  if (!session_dir_.empty()) {
    std::error_code ec;
    std::filesystem::remove(session_dir_ / (session_id + ".json"), ec);
  }
  return true;
}

std::size_t SessionManager::resume_all() {
  if (session_dir_.empty()) return 0;
  std::size_t resumed = 0;
  for (const auto& e : std::filesystem::directory_iterator(session_dir_)) {
    if (!e.is_regular_file() || e.path().extension() != ".json") continue;
    std::ifstream in(e.path());
    const auto j = nlohmann::json::parse(in);
    const std::string id = j.at("session_id").get<std::string>();
    const std::string dataset_id = j.at("dataset_id").get<std::string>();
    const EngineConfig config = config_from_json(j.at("config"));
    auto log = log_from_json(j.at("constraint_log"));

    std::lock_guard lock(mutex_);
    if (sessions_.count(id)) continue;
    if (id.rfind("session-", 0) == 0) counter_ = std::max<std::size_t>(counter_, std::stoul(id.substr(8)));
    sessions_[id] = std::make_shared<Session>(id, dataset_id, load_dataset(dataset_id), config, std::move(log), e.path());
    ++resumed;
  }
  return resumed;
}

}  // namespace cobras::service
