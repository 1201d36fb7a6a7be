#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "prefprog/dsl/ast.hpp"
#include "prefprog/dsl/program.hpp"
#include "prefprog/library/concept_library.hpp"
#include "prefprog/scene/perception.hpp"
#include "prefprog/scene/scene.hpp"

namespace prefprog::dsl {

// Runtime values: numbers, booleans, entity names, and query cells.
struct EntityName {
  std::string name;
  bool operator==(const EntityName&) const = default;
};
using Value = std::variant<double, bool, EntityName, scene::Cell>;

std::string describe(const Value& v);

// Grounded masks and per-cell distance fields, computed once per entity name
// for one scene. Safe for concurrent use.
class FeatureCache {
 public:
  FeatureCache(const scene::Scene& scene, const scene::PerceptionProvider& provider)
      : scene_(scene), provider_(provider) {}

  const scene::Mask& mask(const std::string& name);
  // Throws Error(kEmptyMask) when nothing is grounded.
  const std::vector<double>& distance_field(const std::string& name);

 private:
  const scene::Scene& scene_;
  const scene::PerceptionProvider& provider_;
  std::mutex mutex_;
  std::map<std::string, std::unique_ptr<scene::Mask>> masks_;
  std::map<std::string, std::unique_ptr<std::vector<double>>> fields_;
};

struct Frame {
  scene::Cell q;
  const Assignment* holes = nullptr;                    // for sketches
  const std::map<std::string, Value>* bindings = nullptr;  // concept parameters
};

// Tree-walking interpreter. Conditions short-circuit left to right.
class Evaluator {
 public:
  Evaluator(const scene::Scene& scene, const library::ConceptLibrary& lib,
            const scene::PerceptionProvider& provider, FeatureCache* cache = nullptr)
      : scene_(scene), lib_(lib), provider_(provider), cache_(cache) {}

  // Label of the leaf reached from `q`. Holes are read from `holes`
  // (Error(kUnboundHole) if one is missing).
  std::string run(const Sketch& sketch, scene::Cell q, const Assignment* holes = nullptr) const;
  std::string node(const Node& node, const Frame& frame) const;
  bool condition(const Cond& cond, const Frame& frame) const;
  Value term(const Term& term, const Frame& frame) const;

  // Built-in application on already evaluated arguments (comparators included).
  Value call_function(std::string_view name, const std::vector<Value>& args) const;
  bool call_predicate(const library::PredicateConcept& pred, const std::vector<Value>& args) const;
  // Atom with evaluated arguments; head is a boolean built-in or a predicate.
  bool apply_atom(std::string_view head, const std::vector<Value>& args) const;

  const scene::Scene& scene() const { return scene_; }
  const library::ConceptLibrary& library() const { return lib_; }

 private:
  const scene::Scene& scene_;
  const library::ConceptLibrary& lib_;
  const scene::PerceptionProvider& provider_;
  FeatureCache* cache_;
};

const scene::PerceptionProvider& default_perception();

std::string evaluate(const Program& program, const scene::Scene& scene, scene::Cell q,
                     const library::ConceptLibrary& lib,
                     const scene::PerceptionProvider& provider = default_perception());

// Evaluates a sketch with holes filled from `holes` without substituting.
std::string evaluate_with_holes(const Sketch& sketch, const Assignment& holes, const scene::Scene& scene,
                                scene::Cell q, const library::ConceptLibrary& lib,
                                const scene::PerceptionProvider& provider = default_perception());

struct MaskOptions {
  bool use_cache = true;
  int threads = 1;
};

scene::PreferenceMask evaluate_mask(const Program& program, const scene::Scene& scene,
                                    const library::ConceptLibrary& lib,
                                    const scene::PerceptionProvider& provider = default_perception(),
                                    const MaskOptions& options = {});

}  // namespace prefprog::dsl
