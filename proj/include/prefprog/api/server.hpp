#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "prefprog/error.hpp"
#include "prefprog/scene/perception.hpp"
#include "prefprog/synthesis/lm_provider.hpp"

namespace prefprog::api {

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path scenes_dir;                   // *.json scenes served under /scenes
  std::optional<std::filesystem::path> sessions_dir;  // persist committed sessions here
  double learn_timeout_seconds = 30.0;
  std::string cors_origin = "*";
};

// 400 for malformed input, 422 for synthesis and solver failures.
int http_status(ErrorCode code);
nlohmann::json error_body(ErrorCode code, const std::string& message);

// OpenAPI description of the routes.
nlohmann::json openapi_document();

// JSON-over-HTTP front end for learning sessions. Each session serializes its
// mutations behind its own lock; different sessions proceed in parallel.
// Auxiliary-concept questions raised while learning are parked as open
// queries; answering one re-runs the pending demonstration.
class ApiServer {
 public:
  ApiServer(const synthesis::LmProvider& provider, const scene::PerceptionProvider& perception,
            ServerConfig config);
  ~ApiServer();
  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  // Binds the socket and returns the bound port (throws kIo on failure).
  int bind();
  // Serves until stop(); call bind() first.
  void listen();
  // bind() plus listen() on a background thread.
  int start();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace prefprog::api
