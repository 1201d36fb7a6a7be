#pragma once

#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "prefprog/dsl/program.hpp"
#include "prefprog/scene/scene.hpp"

namespace prefprog::params {

struct LabeledQuery {
  scene::Cell cell;
  std::string label;
  bool operator==(const LabeledQuery&) const = default;
};

// A scene, one or more labeled query cells, and the user's explanation.
struct Demonstration {
  std::string id;
  std::shared_ptr<const scene::Scene> scene;
  std::vector<LabeledQuery> queries;
  std::string explanation;

  bool operator==(const Demonstration& other) const;
};

// Fills an empty id with a digest of the content, so ids stay stable across
// sessions and independent of insertion order.
Demonstration make_demonstration(std::shared_ptr<const scene::Scene> scene, std::vector<LabeledQuery> queries,
                                 std::string explanation, std::string id = "");

// Throws kSchema (no queries / empty explanation), kUnknownLabel, kOutOfBounds.
void validate(const Demonstration& demo, const dsl::LabelSet& labels);

// {id, explanation, queries: [{cell: [r, c], label}], scene: {...}}
nlohmann::ordered_json demo_to_json(const Demonstration& demo);
Demonstration demo_from_json(const nlohmann::json& doc);

}  // namespace prefprog::params
