#include "prefprog/synthesis/lm_provider.hpp"

#include <cstdlib>

#include "prefprog/error.hpp"
#include "prefprog/http_util.hpp"
#include "prefprog/io.hpp"

namespace prefprog::synthesis {

std::string render_template(const std::string& text, const nlohmann::json& context) {
  std::string out;
  std::size_t pos = 0;
  while (true) {
    auto open = text.find("{{", pos);
    if (open == std::string::npos) break;
    auto close = text.find("}}", open + 2);
    if (close == std::string::npos) throw Error(ErrorCode::kSchema, "unterminated placeholder in prompt template");
    out.append(text, pos, open - pos);
    std::string name = text.substr(open + 2, close - open - 2);
    if (!context.contains(name)) throw Error(ErrorCode::kSchema, "prompt placeholder '" + name + "' has no value");
    const auto& v = context.at(name);
    out += v.is_string() ? v.get<std::string>() : v.dump();
    pos = close + 2;
  }
  out.append(text, pos, std::string::npos);
  return out;
}

HttpLmProvider::HttpLmProvider(std::string endpoint, std::string api_key, std::filesystem::path prompt_dir,
                               LmConfig config, double timeout_seconds)
    : endpoint_(std::move(endpoint)),
      api_key_(std::move(api_key)),
      prompt_dir_(std::move(prompt_dir)),
      config_(std::move(config)),
      timeout_seconds_(timeout_seconds) {}

HttpLmProvider HttpLmProvider::from_environment(std::filesystem::path prompt_dir) {
  auto env = [](const char* name) {
    const char* v = std::getenv(name);
    return std::string(v ? v : "");
  };
  LmConfig cfg;
  cfg.model = env("PREFPROG_LM_MODEL").empty() ? "gpt-4" : env("PREFPROG_LM_MODEL");
  return HttpLmProvider(env("PREFPROG_LM_ENDPOINT"), env("PREFPROG_LM_API_KEY"), std::move(prompt_dir), cfg);
}

nlohmann::json HttpLmProvider::complete(const std::string& template_id, const nlohmann::json& context) const {
  std::string prompt = render_template(io::read_text(prompt_dir_ / (template_id + ".txt")), context);
  nlohmann::json body = {{"model", config_.model},
                         {"prompt", prompt},
                         {"temperature", config_.temperature},
                         {"seed", config_.seed},
                         {"stop", nlohmann::json::array({config_.stop})}};
  std::map<std::string, std::string> headers;
  if (!api_key_.empty()) headers["Authorization"] = "Bearer " + api_key_;
  auto reply = http::post_json(endpoint_, body, headers, timeout_seconds_);
  if (!reply.contains("text") || !reply["text"].is_string()) {
    throw Error(ErrorCode::kProviderResponse, "completion reply has no 'text' field");
  }
  std::string text = reply["text"].get<std::string>();
  if (auto cut = text.find(config_.stop); cut != std::string::npos) text.resize(cut);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kProviderResponse, "completion for '" + template_id + "' is not JSON: " + e.what());
  }
}

}  // namespace prefprog::synthesis
