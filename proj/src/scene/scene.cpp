#include "prefprog/scene/scene.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "prefprog/error.hpp"

namespace prefprog::scene {

using nlohmann::json;
using nlohmann::ordered_json;

std::vector<Cell> Mask::cells() const {
  std::vector<Cell> out;
  out.reserve(count_);
  for (int r = 0; r < height_; ++r) {
    for (int c = 0; c < width_; ++c) {
      if (test({r, c})) out.push_back({r, c});
    }
  }
  return out;
}

void Scene::validate() const {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::kSchema, "scene '" + id + "': width and height must be >= 1");
  }
  if (!(cell_size > 0.0)) throw Error(ErrorCode::kSchema, "scene '" + id + "': cell_size must be > 0");
  if (terrain.size() != cell_count()) {
    throw Error(ErrorCode::kSchema, "scene '" + id + "': terrain does not cover every cell");
  }
  if (depth && depth->size() != cell_count()) {
    throw Error(ErrorCode::kSchema, "scene '" + id + "': depth does not match grid dimensions");
  }
  for (std::size_t i = 0; i < entities.size(); ++i) {
    const auto& e = entities[i];
    if (e.concept_name.empty()) {
      throw Error(ErrorCode::kSchema, "entities[" + std::to_string(i) + "].concept: empty");
    }
    if (e.cells.empty()) {
      throw Error(ErrorCode::kSchema, "entities[" + std::to_string(i) + "].cells: empty mask");
    }
    for (const auto& c : e.cells) {
      if (!in_bounds(c)) {
        throw Error(ErrorCode::kOutOfBounds, "entities[" + std::to_string(i) + "].cells: cell [" +
                                                 std::to_string(c.row) + "," +
                                                 std::to_string(c.col) + "] outside grid");
      }
    }
  }
}

const std::string& terrain_at(const Scene& scene, Cell q) {
  if (!scene.in_bounds(q)) throw Error(ErrorCode::kOutOfBounds, "query outside scene");
  return scene.terrain[scene.index(q)];
}

bool is_on(const Scene& scene, Cell q, std::string_view terrain_name) {
  return terrain_at(scene, q) == terrain_name;
}

double depth_at(const Scene& scene, Cell q) {
  if (!scene.depth) {
    throw Error(ErrorCode::kDepthUnavailable, "scene '" + scene.id + "' has no depth layer");
  }
  if (!scene.in_bounds(q)) throw Error(ErrorCode::kOutOfBounds, "query outside scene");
  return (*scene.depth)[scene.index(q)];
}

double grid_distance(const Scene& scene, Cell a, Cell b) {
  double dr = a.row - b.row;
  double dc = a.col - b.col;
  return std::sqrt(dr * dr + dc * dc) * scene.cell_size;
}

namespace {

const json& require(const json& doc, const char* key, const std::string& path) {
  auto it = doc.find(key);
  if (it == doc.end()) throw Error(ErrorCode::kSchema, path + key + ": missing");
  return *it;
}

Cell cell_from_json(const json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer()) {
    throw Error(ErrorCode::kSchema, path + ": expected [row, col]");
  }
  return {j[0].get<int>(), j[1].get<int>()};
}

}  // namespace

Scene scene_from_json(const json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::kSchema, "scene: expected an object");
  Scene s;
  const auto& id = require(doc, "id", "");
  if (!id.is_string()) throw Error(ErrorCode::kSchema, "id: expected a string");
  s.id = id.get<std::string>();
  const auto& w = require(doc, "width", "");
  const auto& h = require(doc, "height", "");
  if (!w.is_number_integer() || !h.is_number_integer()) {
    throw Error(ErrorCode::kSchema, "width/height: expected integers");
  }
  s.width = w.get<int>();
  s.height = h.get<int>();
  const auto& cs = require(doc, "cell_size", "");
  if (!cs.is_number()) throw Error(ErrorCode::kSchema, "cell_size: expected a number");
  s.cell_size = cs.get<double>();

  const auto& terrain = require(doc, "terrain", "");
  if (!terrain.is_array() || terrain.size() != static_cast<std::size_t>(std::max(s.height, 0))) {
    throw Error(ErrorCode::kSchema, "terrain: expected " + std::to_string(s.height) + " rows");
  }
  for (std::size_t r = 0; r < terrain.size(); ++r) {
    const auto& row = terrain[r];
    if (!row.is_array() || row.size() != static_cast<std::size_t>(std::max(s.width, 0))) {
      throw Error(ErrorCode::kSchema,
                  "terrain[" + std::to_string(r) + "]: expected " + std::to_string(s.width) + " labels");
    }
    for (const auto& label : row) {
      if (!label.is_string()) {
        throw Error(ErrorCode::kSchema, "terrain[" + std::to_string(r) + "]: labels must be strings");
      }
      s.terrain.push_back(label.get<std::string>());
    }
  }

  if (auto it = doc.find("depth"); it != doc.end() && !it->is_null()) {
    if (!it->is_array() || it->size() != static_cast<std::size_t>(s.height)) {
      throw Error(ErrorCode::kSchema, "depth: expected " + std::to_string(s.height) + " rows");
    }
    std::vector<double> depth;
    for (std::size_t r = 0; r < it->size(); ++r) {
      const auto& row = (*it)[r];
      if (!row.is_array() || row.size() != static_cast<std::size_t>(s.width)) {
        throw Error(ErrorCode::kSchema, "depth[" + std::to_string(r) + "]: wrong row length");
      }
      for (const auto& v : row) {
        if (!v.is_number()) throw Error(ErrorCode::kSchema, "depth[" + std::to_string(r) + "]: non-numeric");
        depth.push_back(v.get<double>());
      }
    }
    s.depth = std::move(depth);
  }

  const auto& entities = require(doc, "entities", "");
  if (!entities.is_array()) throw Error(ErrorCode::kSchema, "entities: expected an array");
  for (std::size_t i = 0; i < entities.size(); ++i) {
    std::string path = "entities[" + std::to_string(i) + "].";
    const auto& e = entities[i];
    if (!e.is_object()) throw Error(ErrorCode::kSchema, path.substr(0, path.size() - 1) + ": expected an object");
    EntityInstance inst;
    const auto& concept_name = require(e, "concept", path);
    if (!concept_name.is_string()) throw Error(ErrorCode::kSchema, path + "concept: expected a string");
    inst.concept_name = concept_name.get<std::string>();
    const auto& cells = require(e, "cells", path);
    if (!cells.is_array()) throw Error(ErrorCode::kSchema, path + "cells: expected an array");
    for (std::size_t k = 0; k < cells.size(); ++k) {
      inst.cells.push_back(cell_from_json(cells[k], path + "cells[" + std::to_string(k) + "]"));
    }
    if (auto a = e.find("attributes"); a != e.end()) {
      if (!a->is_object()) throw Error(ErrorCode::kSchema, path + "attributes: expected an object");
      inst.attributes = ordered_json::parse(a->dump());
    }
    s.entities.push_back(std::move(inst));
  }
  s.validate();
  return s;
}

ordered_json scene_to_json(const Scene& s) {
  ordered_json doc;
  doc["id"] = s.id;
  doc["width"] = s.width;
  doc["height"] = s.height;
  doc["cell_size"] = s.cell_size;
  ordered_json terrain = ordered_json::array();
  for (int r = 0; r < s.height; ++r) {
    ordered_json row = ordered_json::array();
    for (int c = 0; c < s.width; ++c) row.push_back(s.terrain[s.index({r, c})]);
    terrain.push_back(std::move(row));
  }
  doc["terrain"] = std::move(terrain);
  if (s.depth) {
    ordered_json depth = ordered_json::array();
    for (int r = 0; r < s.height; ++r) {
      ordered_json row = ordered_json::array();
      for (int c = 0; c < s.width; ++c) row.push_back((*s.depth)[s.index({r, c})]);
      depth.push_back(std::move(row));
    }
    doc["depth"] = std::move(depth);
  }
  ordered_json entities = ordered_json::array();
  for (const auto& e : s.entities) {
    ordered_json ej;
    ej["concept"] = e.concept_name;
    ordered_json cells = ordered_json::array();
    for (const auto& c : e.cells) cells.push_back({c.row, c.col});
    ej["cells"] = std::move(cells);
    if (!e.attributes.empty()) ej["attributes"] = e.attributes;
    entities.push_back(std::move(ej));
  }
  doc["entities"] = std::move(entities);
  return doc;
}

std::string scene_to_text(const Scene& s) {
  // One grid row per line keeps fixture diffs readable.
  ordered_json doc = scene_to_json(s);
  std::ostringstream out;
  out << "{\n";
  out << "  \"id\": " << doc["id"].dump() << ",\n";
  out << "  \"width\": " << s.width << ",\n";
  out << "  \"height\": " << s.height << ",\n";
  out << "  \"cell_size\": " << doc["cell_size"].dump() << ",\n";
  auto grid = [&](const char* key) {
    out << "  \"" << key << "\": [\n";
    const auto& rows = doc[key];
    for (std::size_t r = 0; r < rows.size(); ++r) {
      out << "    " << rows[r].dump() << (r + 1 < rows.size() ? ",\n" : "\n");
    }
    out << "  ],\n";
  };
  grid("terrain");
  if (s.depth) grid("depth");
  const auto& entities = doc["entities"];
  if (entities.empty()) {
    out << "  \"entities\": []\n";
  } else {
    out << "  \"entities\": [\n";
    for (std::size_t i = 0; i < entities.size(); ++i) {
      out << "    " << entities[i].dump() << (i + 1 < entities.size() ? ",\n" : "\n");
    }
    out << "  ]\n";
  }
  out << "}\n";
  return out.str();
}

Scene load_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open scene file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kSchema, path.string() + ": " + e.what());
  }
  return scene_from_json(doc);
}

void save_scene(const Scene& scene, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write scene file " + path.string());
  out << scene_to_text(scene);
}

}  // namespace prefprog::scene
