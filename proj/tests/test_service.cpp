#include <gtest/gtest.h>

#include <httplib.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include "cobras_ts/service/http_api.hpp"

using namespace cobras;
using namespace cobras::service;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

class TempDir {
public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("cobras_test_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }

private:
  fs::path path_;
};

Dataset small_cbf() { return generate_cbf({5, 64, 0.2, 3}); }

struct Fixture {
  TempDir dir;
  Dataset ds = small_cbf();
  Fixture() {
    fs::create_directories(dir.path() / "data");
    save_ucr(ds, dir.path() / "data" / "cbf.txt");
  }
  fs::path data() const { return dir.path() / "data"; }
  fs::path sessions() const { return dir.path() / "sessions"; }
};

json config_json(std::size_t budget, std::uint64_t seed = 0) { return {{"budget", budget}, {"rng_seed", seed}}; }

std::string create_body(std::size_t budget, std::uint64_t seed = 0) {
  return json{{"dataset_id", "cbf"}, {"config", config_json(budget, seed)}}.dump();
}

// Answers every pending query from the dataset labels until the session stops.
std::size_t drive(HttpApi& api, const std::string& id, const Dataset& ds) {
  std::size_t answered = 0;
  while (true) {
    const auto q = api.get_query(id).json();
    if (!q.contains("pair")) break;
    const auto i = q.at("pair")[0].get<std::size_t>(), j = q.at("pair")[1].get<std::size_t>();
    const std::string relation = ds.labels()[i] == ds.labels()[j] ? "must_link" : "cannot_link";
    EXPECT_EQ(api.post_answer(id, json{{"relation", relation}}.dump()).status, 200);
    ++answered;
  }
  return answered;
}

std::vector<Constraint> log_of(const ApiResponse& r) {
  std::vector<Constraint> out;
  const auto body = r.json();
  for (const auto& c : body.at("constraints"))
    out.push_back({c.at("i").get<std::size_t>(), c.at("j").get<std::size_t>(), parse_relation(c.at("kind").get<std::string>()),
                   c.at("origin").get<std::string>() == "queried" ? Origin::Queried : Origin::Derived,
                   c.at("sequence_number").get<std::size_t>()});
  return out;
}

}  // namespace

TEST(HttpApi, CreateQueryAndSeriesShape) {
  Fixture fx;
  SessionManager manager(fx.data());
  HttpApi api(manager);
  const auto created = api.create_session(create_body(10));
  ASSERT_EQ(created.status, 201);
  const std::string id = created.json().at("session_id");

  const auto q = api.get_query(id);
  ASSERT_EQ(q.status, 200);
  const auto j = q.json();
  ASSERT_TRUE(j.contains("pair"));
  EXPECT_EQ(j.at("series_i").size(), fx.ds.length());
  EXPECT_EQ(j.at("series_j").size(), fx.ds.length());
  EXPECT_EQ(j.at("queries_used"), 0);
  EXPECT_EQ(j.at("budget"), 10);
  const auto i = j.at("pair")[0].get<std::size_t>();
  EXPECT_EQ(j.at("series_i")[0].get<double>(), fx.ds[i].values()[0]);
}

TEST(HttpApi, SecondAnswerForOneQueryConflicts) {
  Fixture fx;
  SessionManager manager(fx.data());
  HttpApi api(manager);
  const std::string id = api.create_session(create_body(1)).json().at("session_id");
  EXPECT_EQ(api.post_answer(id, R"({"relation":"must_link"})").status, 200);
  // Budget 1: the engine is finished and nothing is pending any more.
  const auto again = api.post_answer(id, R"({"relation":"must_link"})");
  EXPECT_EQ(again.status, 409);
  EXPECT_EQ(api.get_query(id).json().at("phase"), "finished");
}

TEST(HttpApi, ErrorStatuses) {
  Fixture fx;
  SessionManager manager(fx.data());
  HttpApi api(manager);
  EXPECT_EQ(api.get_query("nope").status, 404);
  EXPECT_EQ(api.post_answer("nope", R"({"relation":"must_link"})").status, 404);
  EXPECT_EQ(api.get_clustering("nope").status, 404);
  EXPECT_EQ(api.get_log("nope", "").status, 404);
  EXPECT_EQ(api.delete_session("nope").status, 404);

  EXPECT_EQ(api.create_session("{not json").status, 400);
  EXPECT_EQ(api.create_session(R"({"config":{}})").status, 400);
  EXPECT_EQ(api.create_session(R"({"dataset_id":"missing"})").status, 404);
  EXPECT_EQ(api.create_session(R"({"dataset_id":"cbf","config":{"gamma":-1}})").status, 400);

  const std::string id = api.create_session(create_body(5)).json().at("session_id");
  EXPECT_EQ(api.post_answer(id, "[]").status, 400);
  EXPECT_EQ(api.post_answer(id, R"({"relation":"maybe"})").status, 400);
  EXPECT_EQ(api.post_answer(id, "").status, 400);
  EXPECT_EQ(api.get_log(id, "xml").status, 400);
  EXPECT_TRUE(api.get_query(id).json().contains("pair"));  // still waiting on the same query
}

TEST(HttpApi, ScriptedSessionEqualsReplayRun) {
  Fixture fx;
  SessionManager manager(fx.data());
  HttpApi api(manager);
  for (std::uint64_t seed : {0u, 4u}) {
    const std::string id = api.create_session(create_body(20, seed)).json().at("session_id");
    const std::size_t answered = drive(api, id, fx.ds);
    const auto log = log_of(api.get_log(id, "json"));
    const auto final_clustering = api.get_clustering(id).json();
    EXPECT_EQ(final_clustering.at("queries_used").get<std::size_t>(), answered);
    EXPECT_NE(final_clustering.at("phase"), "failed");

    EngineConfig config;
    config.budget = 20;
    config.rng_seed = seed;
    ReplayOracle replay(log);
    const auto in_process = run(fx.ds, config, replay, std::vector<bool>(fx.ds.size(), true));
    EXPECT_EQ(final_clustering.at("labels").get<std::vector<std::size_t>>(), in_process.clustering.labels(fx.ds.size()));
    EXPECT_EQ(in_process.log, log);

    // And both equal the plain label-oracle run the answers were taken from.
    LabelOracle labels(fx.ds.labels());
    EXPECT_EQ(run(fx.ds, config, labels, std::vector<bool>(fx.ds.size(), true)).clustering, in_process.clustering);

    const auto& clusters = final_clustering.at("clusters");
    EXPECT_EQ(clusters.size(), in_process.clustering.cluster_count());
    for (const auto& c : clusters)
      for (const auto& si : c.at("super_instances")) {
        const auto rep = si.at("representative").get<std::size_t>();
        const auto values = fx.ds[rep].values();
        EXPECT_EQ(si.at("representative_series").get<std::vector<double>>(), std::vector<double>(values.begin(), values.end()));
      }
  }
}

TEST(HttpApi, LogAsCsvAndDelete) {
  Fixture fx;
  SessionManager manager(fx.data());
  HttpApi api(manager);
  const std::string id = api.create_session(create_body(10)).json().at("session_id");
  ASSERT_EQ(api.post_answer(id, R"({"relation":"cannot_link"})").status, 200);
  const auto csv = api.get_log(id, "csv");
  EXPECT_EQ(csv.status, 200);
  EXPECT_EQ(csv.content_type, "text/csv");
  EXPECT_EQ(ConstraintStore::parse_log_csv(csv.body), log_of(api.get_log(id, "")));
  EXPECT_EQ(api.delete_session(id).status, 200);
  EXPECT_EQ(api.get_query(id).status, 404);
}

TEST(HttpApi, DatasetUploadAndListing) {
  Fixture fx;
  SessionManager manager(fx.data());
  HttpApi api(manager);
  EXPECT_EQ(api.list_datasets().json().at("datasets"), json::array({"cbf"}));
  const std::string content = "a,1,2,3\nb,3,2,1\na,1,2,4\n";
  EXPECT_EQ(api.upload_dataset(json{{"name", "tiny"}, {"content", content}}.dump()).status, 201);
  EXPECT_EQ(api.list_datasets().json().at("datasets"), json::array({"cbf", "tiny"}));
  EXPECT_EQ(api.upload_dataset(json{{"name", "bad"}, {"content", "a,1,2\nb,1\n"}}.dump()).status, 400);
  EXPECT_EQ(api.upload_dataset(json{{"name", "../escape"}, {"content", content}}.dump()).status, 400);
  EXPECT_EQ(api.upload_dataset(R"({"name":"x"})").status, 400);
  EXPECT_EQ(manager.load_dataset("tiny").size(), 3u);
}

TEST(SessionManager, CrashResumeLandsOnTheSamePendingQuery) {
  Fixture fx;
  std::pair<std::size_t, std::size_t> pending_before;
  std::string id;
  const fs::path saved = fx.dir.path() / "snapshot.json";
  {
    SessionManager manager(fx.data(), fx.sessions());
    HttpApi api(manager);
    id = api.create_session(create_body(30, 2)).json().at("session_id");
    for (int k = 0; k < 4; ++k) {
      const auto q = api.get_query(id).json();
      ASSERT_TRUE(q.contains("pair"));
      const auto i = q.at("pair")[0].get<std::size_t>(), j = q.at("pair")[1].get<std::size_t>();
      api.post_answer(id, json{{"relation", fx.ds.labels()[i] == fx.ds.labels()[j] ? "must_link" : "cannot_link"}}.dump());
    }
    const auto q = api.get_query(id).json();
    ASSERT_TRUE(q.contains("pair"));
    pending_before = {q.at("pair")[0], q.at("pair")[1]};
    // The file as it is on disk while the engine waits; a crash would leave exactly this.
    fs::copy_file(fx.sessions() / (id + ".json"), saved);
    const auto on_disk = json::parse(std::ifstream(saved));
    EXPECT_EQ(on_disk.at("constraint_log").size(), 4u);
    EXPECT_TRUE(on_disk.contains("engine"));
  }
  fs::copy_file(saved, fx.sessions() / (id + ".json"), fs::copy_options::overwrite_existing);

  SessionManager restarted(fx.data(), fx.sessions());
  EXPECT_EQ(restarted.resume_all(), 1u);
  auto session = restarted.find(id);
  ASSERT_TRUE(session);
  ASSERT_TRUE(session->wait_until_idle(std::chrono::seconds(30)));
  EXPECT_EQ(session->pending(), pending_before);
  EXPECT_EQ(session->queries_used(), 4u);

  // New sessions do not reuse the resumed id.
  EXPECT_NE(restarted.create("cbf", EngineConfig{})->id(), id);
}

TEST(HttpServer, RoundTripOverASocket) {
  Fixture fx;
  SessionManager manager(fx.data());
  HttpApi api(manager);
  httplib::Server server;
  api.bind(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread listener([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto created = client.Post("/sessions", create_body(6), "application/json");
  ASSERT_TRUE(created);
  EXPECT_EQ(created->status, 201);
  const std::string id = json::parse(created->body).at("session_id");

  auto query = client.Get("/sessions/" + id + "/query");
  ASSERT_TRUE(query);
  EXPECT_EQ(query->status, 200);
  EXPECT_TRUE(json::parse(query->body).contains("pair"));

  auto answer = client.Post("/sessions/" + id + "/answer", R"({"relation":"must_link"})", "application/json");
  ASSERT_TRUE(answer);
  EXPECT_EQ(answer->status, 200);
  auto bad = client.Post("/sessions/" + id + "/answer", "nonsense", "application/json");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);

  auto log = client.Get("/sessions/" + id + "/log?format=csv");
  ASSERT_TRUE(log);
  EXPECT_EQ(log->get_header_value("Content-Type"), "text/csv");
  auto clustering = client.Get("/sessions/" + id + "/clustering");
  ASSERT_TRUE(clustering);
  EXPECT_EQ(json::parse(clustering->body).at("labels").size(), fx.ds.size());
  auto datasets = client.Get("/datasets");
  ASSERT_TRUE(datasets);
  EXPECT_EQ(json::parse(datasets->body).at("datasets"), json::array({"cbf"}));

  auto removed = client.Delete("/sessions/" + id);
  ASSERT_TRUE(removed);
  EXPECT_EQ(removed->status, 200);
  auto missing = client.Get("/sessions/" + id + "/query");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);

  server.stop();
  listener.join();
}

TEST(HttpServer, PortFromEnvironment) {
  ::setenv("COBRAS_PORT", "9123", 1);
  EXPECT_EQ(port_from_env(), 9123);
  ::setenv("COBRAS_PORT", "abc", 1);
  EXPECT_EQ(port_from_env(7000), 7000);
  ::unsetenv("COBRAS_PORT");
  EXPECT_EQ(port_from_env(), 8080);
}
