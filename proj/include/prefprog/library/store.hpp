#pragma once

#include <filesystem>

#include "prefprog/library/concept_library.hpp"

namespace prefprog::library {

inline constexpr int kLibraryFormatVersion = 1;

// Directory layout:
//   <dir>/library.json        format version and entity names
//   <dir>/<name>/meta.json    parameters, per-version provenance and dependencies
//   <dir>/<name>/v<k>.pref    body of version k
void save_library(const ConceptLibrary& lib, const std::filesystem::path& dir);

// Concepts are added in dependency order. Throws kMissingDependency (naming
// both concepts), kVersionFormat, kCycle, kIo, kSchema.
ConceptLibrary load_library(const std::filesystem::path& dir);

}  // namespace prefprog::library
