#include "prefprog/http_util.hpp"

#include <httplib.h>

#include "prefprog/error.hpp"

namespace prefprog::http {

namespace {

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Url split_url(const std::string& url) {
  if (url.empty()) throw Error(ErrorCode::kProviderFailure, "provider endpoint is not configured");
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::kProviderFailure, "endpoint '" + url + "' lacks a scheme");
  }
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

nlohmann::json post_json(const std::string& url, const nlohmann::json& body,
                         const std::map<std::string, std::string>& headers, double timeout_seconds) {
  Url parts = split_url(url);
  httplib::Client client(parts.origin);
  auto seconds = static_cast<time_t>(timeout_seconds);
  auto micros = static_cast<time_t>((timeout_seconds - static_cast<double>(seconds)) * 1e6);
  client.set_connection_timeout(seconds, micros);
  client.set_read_timeout(seconds, micros);
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  auto res = client.Post(parts.path, h, body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::kProviderFailure,
                "request to " + url + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw Error(ErrorCode::kProviderFailure,
                "request to " + url + " returned HTTP " + std::to_string(res->status));
  }
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kProviderResponse, "unparseable reply from " + url + ": " + e.what());
  }
}

}  // namespace prefprog::http
