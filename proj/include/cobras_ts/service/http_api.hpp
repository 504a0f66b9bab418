#pragma once

#include <chrono>
#include <map>
#include <string>

#include <json.hpp>

#include "cobras_ts/service/session.hpp"

namespace httplib {
class Server;
}

namespace cobras::service {

struct ApiResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";

  nlohmann::json json() const { return nlohmann::json::parse(body); }
};

/// JSON-over-HTTP adapter on top of a SessionManager. Each handler is a plain function of
/// the request pieces so it can be exercised without a socket.
class HttpApi {
public:
  /// `settle` bounds how long create/answer wait for the engine to reach its next query.
  explicit HttpApi(SessionManager& manager, std::chrono::milliseconds settle = std::chrono::seconds(30));

  ApiResponse create_session(const std::string& body);
  ApiResponse get_query(const std::string& id);
  ApiResponse post_answer(const std::string& id, const std::string& body);
  ApiResponse get_clustering(const std::string& id);
  ApiResponse get_log(const std::string& id, const std::string& format);
  ApiResponse delete_session(const std::string& id);
  ApiResponse list_datasets();
  ApiResponse upload_dataset(const std::string& body);

  /// Registers every route on `server`.
  void bind(httplib::Server& server);

private:
  SessionManager& manager_;
  std::chrono::milliseconds settle_;
};

/// Port from COBRAS_PORT, or `fallback` when unset or malformed.
int port_from_env(int fallback = 8080);

}  // namespace cobras::service
