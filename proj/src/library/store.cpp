#include "prefprog/library/store.hpp"

#include <functional>
#include <map>
#include <set>

#include "prefprog/dsl/syntax.hpp"
#include "prefprog/error.hpp"
#include "prefprog/io.hpp"

namespace prefprog::library {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ordered_json params_to_json(const std::vector<Param>& params) {
  ordered_json out = ordered_json::array();
  for (const auto& p : params) out.push_back({{"name", p.name}, {"kind", kind_name(p.kind)}});
  return out;
}

std::vector<Param> params_from_json(const json& doc) {
  std::vector<Param> out;
  for (const auto& p : doc) out.push_back({p.at("name").get<std::string>(), kind_from_name(p.at("kind").get<std::string>())});
  return out;
}

void check_format(const json& doc, const fs::path& path) {
  int v = doc.value("format_version", -1);
  if (v != kLibraryFormatVersion) {
    throw Error(ErrorCode::kVersionFormat, path.string() + ": format_version " + std::to_string(v) +
                                               " (expected " + std::to_string(kLibraryFormatVersion) + ")");
  }
}

struct StoredConcept {
  fs::path dir;
  json meta;
  std::set<std::string> deps;
};

}  // namespace

void save_library(const ConceptLibrary& lib, const fs::path& dir) {
  fs::create_directories(dir);
  ordered_json root = {{"format_version", kLibraryFormatVersion}, {"entities", lib.entities()}};
  io::write_json(dir / "library.json", root);

  for (const auto& name : lib.predicate_names()) {
    const auto& versions = lib.history(name);
    const auto& latest = versions.back();
    ordered_json meta = {{"format_version", kLibraryFormatVersion},
                         {"name", name},
                         {"arity", latest.params.size()},
                         {"params", params_to_json(latest.params)},
                         {"versions", ordered_json::array()}};
    for (const auto& v : versions) {
      meta["versions"].push_back({{"version", v.version},
                                  {"file", "v" + std::to_string(v.version) + ".pref"},
                                  {"params", params_to_json(v.params)},
                                  {"provenance", v.provenance},
                                  {"created_at", v.created_at},
                                  {"depends_on", v.depends_on}});
      io::write_text(dir / name / ("v" + std::to_string(v.version) + ".pref"),
                     dsl::print_program(v.body.sketch()) + "\n");
    }
    io::write_json(dir / name / "meta.json", meta);
  }
}

ConceptLibrary load_library(const fs::path& dir) {
  const fs::path root_path = dir / "library.json";
  if (!fs::exists(root_path)) throw Error(ErrorCode::kIo, "no library at " + dir.string());
  ConceptLibrary lib;
  std::map<std::string, StoredConcept> stored;
  try {
    json root = io::read_json(root_path);
    check_format(root, root_path);
    for (const auto& e : root.at("entities")) lib = lib.add_entity(e.get<std::string>());

    for (const auto& entry : fs::directory_iterator(dir)) {
      if (!entry.is_directory()) continue;
      fs::path meta_path = entry.path() / "meta.json";
      if (!fs::exists(meta_path)) continue;
      json meta = io::read_json(meta_path);
      check_format(meta, meta_path);
      StoredConcept sc{entry.path(), meta, {}};
      for (const auto& v : meta.at("versions")) {
        for (const auto& d : v.at("depends_on")) sc.deps.insert(d.get<std::string>());
      }
      stored.emplace(meta.at("name").get<std::string>(), std::move(sc));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchema, dir.string() + ": " + e.what());
  }

  for (const auto& [name, sc] : stored) {
    for (const auto& d : sc.deps) {
      if (stored.count(d) == 0) {
        throw Error(ErrorCode::kMissingDependency,
                    "concept '" + name + "' depends on '" + d + "', which is missing from " + dir.string());
      }
    }
  }

  std::set<std::string> done;
  std::set<std::string> active;
  std::function<void(const std::string&)> load_one = [&](const std::string& name) {
    if (done.count(name) > 0) return;
    if (!active.insert(name).second) {
      throw Error(ErrorCode::kCycle, "stored library has a dependency cycle through '" + name + "'");
    }
    const auto& sc = stored.at(name);
    for (const auto& d : sc.deps) load_one(d);
    try {
      for (const auto& v : sc.meta.at("versions")) {
        int number = v.at("version").get<int>();
        std::string text = io::read_text(sc.dir / v.at("file").get<std::string>());
        PredicateConcept def{
            .name = name,
            .params = params_from_json(v.at("params")),
            .body = dsl::Program::from_sketch(dsl::parse_program(text, dsl::LabelSet::boolean())),
            .provenance = v.at("provenance").get<std::vector<std::string>>(),
            .version = number,
            .created_at = v.at("created_at").get<std::string>(),
            .depends_on = {},
        };
        lib = lib.add_predicate(std::move(def));
        if (lib.lookup_predicate(name).version != number) {
          throw Error(ErrorCode::kVersionFormat, "concept '" + name + "' has non-contiguous versions");
        }
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kSchema, (sc.dir / "meta.json").string() + ": " + e.what());
    }
    active.erase(name);
    done.insert(name);
  };
  for (const auto& [name, _] : stored) load_one(name);
  return lib;
}

}  // namespace prefprog::library
