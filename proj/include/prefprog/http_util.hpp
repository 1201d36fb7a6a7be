#pragma once

#include <map>
#include <string>

#include <nlohmann/json.hpp>

namespace prefprog::http {

// POSTs a JSON body to an http:// URL and parses the JSON reply. Transport
// failures and non-2xx statuses throw Error(kProviderFailure); an unparseable
// body throws Error(kProviderResponse).
nlohmann::json post_json(const std::string& url, const nlohmann::json& body,
                         const std::map<std::string, std::string>& headers, double timeout_seconds);

}  // namespace prefprog::http
