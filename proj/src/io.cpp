#include "prefprog/io.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "prefprog/error.hpp"

namespace prefprog::io {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
    out << text;
    if (!out.flush()) throw Error(ErrorCode::kIo, "short write to " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

nlohmann::json read_json(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kSchema, path.string() + ": " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& doc) {
  write_text(path, doc.dump(2) + "\n");
}

std::filesystem::path default_data_dir() {
  if (const char* env = std::getenv("PREFPROG_DATA_DIR"); env != nullptr && *env != '\0') return env;
  return PREFPROG_DEFAULT_DATA_DIR;
}

}  // namespace prefprog::io
