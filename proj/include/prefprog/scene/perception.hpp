#pragma once

#include <map>
#include <string>
#include <string_view>

#include "prefprog/scene/scene.hpp"

namespace prefprog::scene {

// Stand-in for the open-vocabulary detector / terrain segmenter stack.
// Implementations must be deterministic for a fixed (scene, name, config)
// and safe to call concurrently.
class PerceptionProvider {
 public:
  virtual ~PerceptionProvider() = default;
  // Empty mask when the concept is absent; absence is not an error.
  virtual Mask ground(const Scene& scene, std::string_view concept_name) const = 0;
};

// Reads the scene's own annotations: union of all entity instances with a
// matching concept name plus all terrain cells carrying that label.
class ScriptedPerception : public PerceptionProvider {
 public:
  Mask ground(const Scene& scene, std::string_view concept_name) const override;
};

struct DetectionThresholds {
  double box = 0.3;
  double text = 0.3;
  double nms = 0.4;
};

struct GroundingConfig {
  DetectionThresholds defaults;
  std::map<std::string, DetectionThresholds, std::less<>> per_class;

  const DetectionThresholds& thresholds_for(std::string_view concept_name) const;
};

// Client for an external grounding service. Request:
//   POST <endpoint> {"scene_id", "concept", "box_threshold",
//                    "text_threshold", "nms_threshold"}
// Response: {"cells": [[row, col], ...]}.
class HttpPerception : public PerceptionProvider {
 public:
  HttpPerception(std::string endpoint, GroundingConfig config, double timeout_seconds = 10.0);

  // Endpoint from PREFPROG_PERCEPTION_ENDPOINT.
  static HttpPerception from_env(GroundingConfig config = {});

  Mask ground(const Scene& scene, std::string_view concept_name) const override;
  const GroundingConfig& config() const { return config_; }

 private:
  std::string endpoint_;
  GroundingConfig config_;
  double timeout_seconds_;
};

Mask ground_entity(const Scene& scene, std::string_view name, const PerceptionProvider& provider);

// Minimum center-to-center distance from q to the grounded mask, in meters.
// Throws Error(kEmptyMask) when nothing is grounded under that name.
double dist_to(const Scene& scene, Cell q, std::string_view name, const PerceptionProvider& provider);
double dist_to_mask(const Scene& scene, Cell q, const Mask& mask);

bool in_region(const Scene& scene, Cell q, std::string_view name, const PerceptionProvider& provider);

}  // namespace prefprog::scene
