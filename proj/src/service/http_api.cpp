#include "cobras_ts/service/http_api.hpp"

#include <charconv>
#include <cstdlib>

#include <httplib.h>

namespace cobras::service {

namespace {

using nlohmann::json;

ApiResponse reply(int status, const json& body) { return {status, body.dump()}; }
ApiResponse error(int status, const std::string& message) { return reply(status, {{"error", message}}); }

std::vector<double> values_of(const Dataset& ds, std::size_t i) {
  const auto v = ds[i].values();
  return {v.begin(), v.end()};
}

}  // namespace

HttpApi::HttpApi(SessionManager& manager, std::chrono::milliseconds settle) : manager_(manager), settle_(settle) {}

ApiResponse HttpApi::create_session(const std::string& body) {
  std::string dataset_id;
  EngineConfig config;
  try {
    const auto j = json::parse(body);
    dataset_id = j.at("dataset_id").get<std::string>();
    if (j.contains("config")) config = config_from_json(j.at("config"));
    config.validate();
  } catch (const std::exception& e) {
    return error(400, std::string("malformed request: ") + e.what());
  }
  try {
    auto session = manager_.create(dataset_id, config);
    session->wait_until_idle(settle_);
    return reply(201, {{"session_id", session->id()}});
  } catch (const NotFound& e) {
    return error(404, e.what());
  } catch (const PreconditionError& e) {
    return error(400, e.what());
  }
}

ApiResponse HttpApi::get_query(const std::string& id) {
  auto session = manager_.find(id);
  if (!session) return error(404, "unknown session '" + id + "'");
  const auto& ds = session->dataset();
  json out = {{"queries_used", session->queries_used()}, {"budget", session->config().budget}};
  if (auto pair = session->pending()) {
    out["pair"] = {pair->first, pair->second};
    out["series_i"] = values_of(ds, pair->first);
    out["series_j"] = values_of(ds, pair->second);
  } else {
    out["phase"] = to_string(session->phase());
    if (const auto err = session->error(); !err.empty()) out["error"] = err;
  }
  return reply(200, out);
}

ApiResponse HttpApi::post_answer(const std::string& id, const std::string& body) {
  auto session = manager_.find(id);
  if (!session) return error(404, "unknown session '" + id + "'");
  Relation relation;
  try {
    relation = parse_relation(json::parse(body).at("relation").get<std::string>());
    if (relation == Relation::Unknown) throw Error("relation must be must_link or cannot_link");
  } catch (const std::exception& e) {
    return error(400, std::string("malformed request: ") + e.what());
  }
  if (session->answer(relation, settle_) == Session::AnswerStatus::NoPendingQuery)
    return error(409, "no pending query");
  return reply(200, {{"accepted", true}, {"phase", to_string(session->phase())}});
}

ApiResponse HttpApi::get_clustering(const std::string& id) {
  auto session = manager_.find(id);
  if (!session) return error(404, "unknown session '" + id + "'");
  const auto& ds = session->dataset();
  const Clustering clustering = session->clustering();
  json clusters = json::array();
  for (const auto& cluster : clustering.clusters) {
    json sis = json::array();
    std::vector<std::size_t> members;
    for (const auto& si : cluster) {
      members.insert(members.end(), si.members.begin(), si.members.end());
      sis.push_back({{"members", si.members},
                     {"representative", si.representative},
                     {"representative_series", values_of(ds, si.representative)}});
    }
    std::sort(members.begin(), members.end());
    clusters.push_back({{"members", members}, {"super_instances", sis}});
  }
  return reply(200, {{"phase", to_string(session->phase())},
                     {"queries_used", session->queries_used()},
                     {"labels", clustering.labels(ds.size())},
                     {"clusters", clusters}});
}

ApiResponse HttpApi::get_log(const std::string& id, const std::string& format) {
  auto session = manager_.find(id);
  if (!session) return error(404, "unknown session '" + id + "'");
  if (format == "csv") {
    return {200, constraint_log_csv(session->log()), "text/csv"};
  }
  if (!format.empty() && format != "json") return error(400, "format must be json or csv");
  return reply(200, {{"constraints", session->file_json().at("constraint_log")}});
}

ApiResponse HttpApi::delete_session(const std::string& id) {
  if (!manager_.remove(id)) return error(404, "unknown session '" + id + "'");
  return reply(200, {{"session_id", id}, {"phase", "aborted"}});
}

ApiResponse HttpApi::list_datasets() {
  json out = json::array();
  for (const auto& id : manager_.dataset_ids()) out.push_back(id);
  return reply(200, {{"datasets", out}});
}

ApiResponse HttpApi::upload_dataset(const std::string& body) {
  std::string name, content;
  try {
    const auto j = json::parse(body);
    name = j.at("name").get<std::string>();
    content = j.at("content").get<std::string>();
  } catch (const std::exception& e) {
    return error(400, std::string("malformed request: ") + e.what());
  }
  try {
    manager_.save_dataset(name, content);
  } catch (const Error& e) {
    return error(400, e.what());
  }
  return reply(201, {{"dataset_id", name}});
}

void HttpApi::bind(httplib::Server& server) {
  auto send = [](httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  server.Post("/sessions", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, create_session(req.body));
  });
  server.Get("/sessions/:id/query", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, get_query(req.path_params.at("id")));
  });
  server.Post("/sessions/:id/answer", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, post_answer(req.path_params.at("id"), req.body));
  });
  server.Get("/sessions/:id/clustering", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, get_clustering(req.path_params.at("id")));
  });
  server.Get("/sessions/:id/log", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, get_log(req.path_params.at("id"), req.get_param_value("format")));
  });
  server.Delete("/sessions/:id", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, delete_session(req.path_params.at("id")));
  });
  server.Get("/datasets", [this, send](const httplib::Request&, httplib::Response& res) { send(res, list_datasets()); });
  server.Post("/datasets", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, upload_dataset(req.body));
  });
  server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string message = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      message = e.what();
    } catch (...) {
    }
    res.status = 500;
    res.set_content(json{{"error", message}}.dump(), "application/json");
  });
}

int port_from_env(int fallback) {
  const char* env = std::getenv("COBRAS_PORT");
  if (!env) return fallback;
  int port = 0;
  const std::string_view s(env);
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), port);
  if (ec != std::errc{} || p != s.data() + s.size() || port <= 0 || port > 65535) return fallback;
  return port;
}

}  // namespace cobras::service
