#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

namespace prefprog::io {

// Throws Error(kIo) when the file cannot be read.
std::string read_text(const std::filesystem::path& path);
// Writes through a temporary file and renames, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);
// Throws Error(kSchema) on malformed JSON.
nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& doc);

// $PREFPROG_DATA_DIR if set, else the data/ directory of the source tree.
std::filesystem::path default_data_dir();

}  // namespace prefprog::io
