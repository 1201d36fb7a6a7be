#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace prefprog::scene {

struct Cell {
  int row = 0;
  int col = 0;
  auto operator<=>(const Cell&) const = default;
};

// Dense bitmap over a scene grid.
class Mask {
 public:
  Mask() = default;
  Mask(int width, int height)
      : width_(width), height_(height), bits_(static_cast<std::size_t>(width * height), 0) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool test(Cell c) const { return bits_[index(c)] != 0; }
  void set(Cell c) {
    auto& b = bits_[index(c)];
    if (b == 0) ++count_;
    b = 1;
  }
  std::size_t count() const { return count_; }
  bool empty() const { return count_ == 0; }
  std::vector<Cell> cells() const;

  bool operator==(const Mask& other) const {
    return width_ == other.width_ && height_ == other.height_ && bits_ == other.bits_;
  }

 private:
  std::size_t index(Cell c) const {
    return static_cast<std::size_t>(c.row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(c.col);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
  std::size_t count_ = 0;
};

struct EntityInstance {
  std::string concept_name;
  std::vector<Cell> cells;
  nlohmann::ordered_json attributes = nlohmann::ordered_json::object();

  bool operator==(const EntityInstance&) const = default;
};

// Grid-based symbolic observation: terrain segmentation, optional depth, and
// annotated entity masks. Immutable once validated.
struct Scene {
  std::string id;
  int width = 0;
  int height = 0;
  double cell_size = 1.0;             // meters per cell
  std::vector<std::string> terrain;   // row-major, width*height labels
  std::optional<std::vector<double>> depth;  // row-major meters
  std::vector<EntityInstance> entities;

  bool in_bounds(Cell c) const {
    return c.row >= 0 && c.col >= 0 && c.row < height && c.col < width;
  }
  std::size_t cell_count() const {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  std::size_t index(Cell c) const {
    return static_cast<std::size_t>(c.row) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(c.col);
  }

  // Throws Error(kSchema / kOutOfBounds) on violated invariants.
  void validate() const;

  bool operator==(const Scene&) const = default;
};

// Per-cell preference labels over a scene grid.
struct PreferenceMask {
  int width = 0;
  int height = 0;
  std::vector<std::string> labels;  // row-major

  const std::string& at(Cell c) const {
    return labels[static_cast<std::size_t>(c.row) * static_cast<std::size_t>(width) +
                  static_cast<std::size_t>(c.col)];
  }
  bool operator==(const PreferenceMask&) const = default;
};

const std::string& terrain_at(const Scene& scene, Cell q);
bool is_on(const Scene& scene, Cell q, std::string_view terrain_name);
double depth_at(const Scene& scene, Cell q);

// Euclidean center-to-center distance in meters.
double grid_distance(const Scene& scene, Cell a, Cell b);

// Scene JSON schema: {id, width, height, cell_size, terrain, depth?, entities}.
Scene scene_from_json(const nlohmann::json& doc);
nlohmann::ordered_json scene_to_json(const Scene& scene);
// Canonical text form; save(load(f)) is byte-identical for canonical files.
std::string scene_to_text(const Scene& scene);
Scene load_scene(const std::filesystem::path& path);
void save_scene(const Scene& scene, const std::filesystem::path& path);

}  // namespace prefprog::scene
