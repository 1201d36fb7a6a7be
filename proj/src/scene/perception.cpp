#include "prefprog/scene/perception.hpp"

#include <cmath>
#include <cstdlib>
#include <limits>

#include "prefprog/error.hpp"
#include "prefprog/http_util.hpp"

namespace prefprog::scene {

Mask ScriptedPerception::ground(const Scene& scene, std::string_view concept_name) const {
  Mask mask(scene.width, scene.height);
  for (const auto& e : scene.entities) {
    if (e.concept_name != concept_name) continue;
    for (const auto& c : e.cells) mask.set(c);
  }
  for (int r = 0; r < scene.height; ++r) {
    for (int c = 0; c < scene.width; ++c) {
      if (scene.terrain[scene.index({r, c})] == concept_name) mask.set({r, c});
    }
  }
  return mask;
}

const DetectionThresholds& GroundingConfig::thresholds_for(std::string_view concept_name) const {
  auto it = per_class.find(concept_name);
  return it == per_class.end() ? defaults : it->second;
}

HttpPerception::HttpPerception(std::string endpoint, GroundingConfig config, double timeout_seconds)
    : endpoint_(std::move(endpoint)), config_(std::move(config)), timeout_seconds_(timeout_seconds) {}

HttpPerception HttpPerception::from_env(GroundingConfig config) {
  const char* endpoint = std::getenv("PREFPROG_PERCEPTION_ENDPOINT");
  return HttpPerception(endpoint == nullptr ? "" : endpoint, std::move(config));
}

Mask HttpPerception::ground(const Scene& scene, std::string_view concept_name) const {
  const auto& t = config_.thresholds_for(concept_name);
  nlohmann::json request = {{"scene_id", scene.id},
                            {"concept", std::string(concept_name)},
                            {"box_threshold", t.box},
                            {"text_threshold", t.text},
                            {"nms_threshold", t.nms}};
  nlohmann::json response = http::post_json(endpoint_, request, {}, timeout_seconds_);
  Mask mask(scene.width, scene.height);
  const auto it = response.find("cells");
  if (it == response.end() || !it->is_array()) {
    throw Error(ErrorCode::kProviderResponse, "grounding response lacks a 'cells' array");
  }
  for (const auto& cell : *it) {
    if (!cell.is_array() || cell.size() != 2) {
      throw Error(ErrorCode::kProviderResponse, "grounding response cell is not [row, col]");
    }
    Cell c{cell[0].get<int>(), cell[1].get<int>()};
    if (!scene.in_bounds(c)) {
      throw Error(ErrorCode::kProviderResponse, "grounding response cell outside the scene");
    }
    mask.set(c);
  }
  return mask;
}

Mask ground_entity(const Scene& scene, std::string_view name, const PerceptionProvider& provider) {
  return provider.ground(scene, name);
}

double dist_to_mask(const Scene& scene, Cell q, const Mask& mask) {
  double best_sq = std::numeric_limits<double>::infinity();
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) {
      if (!mask.test({r, c})) continue;
      double dr = r - q.row;
      double dc = c - q.col;
      best_sq = std::min(best_sq, dr * dr + dc * dc);
    }
  }
  return std::sqrt(best_sq) * scene.cell_size;
}

double dist_to(const Scene& scene, Cell q, std::string_view name, const PerceptionProvider& provider) {
  if (!scene.in_bounds(q)) throw Error(ErrorCode::kOutOfBounds, "query outside scene");
  Mask mask = provider.ground(scene, name);
  if (mask.empty()) {
    throw Error(ErrorCode::kEmptyMask,
                "no '" + std::string(name) + "' grounded in scene '" + scene.id + "'");
  }
  return dist_to_mask(scene, q, mask);
}

bool in_region(const Scene& scene, Cell q, std::string_view name, const PerceptionProvider& provider) {
  if (!scene.in_bounds(q)) throw Error(ErrorCode::kOutOfBounds, "query outside scene");
  return provider.ground(scene, name).test(q);
}

}  // namespace prefprog::scene
