#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

namespace prefprog::synthesis {

struct LmConfig {
  std::string model = "scripted";
  double temperature = 0.0;
  int seed = 0;
  std::string stop = "END";
};

// Structured completion: a prompt-template id plus a JSON context in, a JSON
// record out. Providers never hand back raw code outside such records.
class LmProvider {
 public:
  virtual ~LmProvider() = default;
  virtual nlohmann::json complete(const std::string& template_id, const nlohmann::json& context) const = 0;
  virtual const LmConfig& config() const = 0;
};

// Replaces every {{name}} with context[name] (strings verbatim, other values
// as compact JSON). Unknown placeholders throw Error(kSchema).
std::string render_template(const std::string& text, const nlohmann::json& context);

// Talks to a completion endpoint over HTTP. The request body is
// {model, prompt, temperature, seed, stop: [stop]}; the reply must carry the
// completion in "text", which is cut at the stop token and parsed as JSON.
class HttpLmProvider : public LmProvider {
 public:
  HttpLmProvider(std::string endpoint, std::string api_key, std::filesystem::path prompt_dir, LmConfig config = {},
                 double timeout_seconds = 60.0);

  // PREFPROG_LM_ENDPOINT, PREFPROG_LM_API_KEY, PREFPROG_LM_MODEL.
  static HttpLmProvider from_environment(std::filesystem::path prompt_dir);

  nlohmann::json complete(const std::string& template_id, const nlohmann::json& context) const override;
  const LmConfig& config() const override { return config_; }

 private:
  std::string endpoint_;
  std::string api_key_;
  std::filesystem::path prompt_dir_;
  LmConfig config_;
  double timeout_seconds_;
};

}  // namespace prefprog::synthesis
