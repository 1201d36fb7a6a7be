#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "prefprog/dsl/ast.hpp"
#include "prefprog/dsl/program.hpp"

namespace prefprog::library {

enum class Kind { kNumber, kBool, kEntity, kQuery };

std::string_view kind_name(Kind kind);
Kind kind_from_name(std::string_view name);

struct Param {
  std::string name;
  Kind kind = Kind::kEntity;
  bool operator==(const Param&) const = default;
};

struct FunctionSignature {
  std::string name;
  std::vector<Kind> params;
  Kind result = Kind::kNumber;
  // For a fixed first argument at most one value of the second argument makes
  // the predicate true (terrain labels partition the grid).
  bool partitions_first_arg = false;
};

// A learned boolean concept: a program over labels {true, false} whose free
// identifiers are its parameters.
struct PredicateConcept {
  std::string name;
  std::vector<Param> params;
  dsl::Program body;
  std::vector<std::string> provenance;  // demonstration ids
  int version = 0;
  std::string created_at;
  std::vector<std::string> depends_on;  // filled in by add_predicate

  bool operator==(const PredicateConcept&) const = default;
};

enum class ConceptKind { kEntity, kPredicate, kFunction };

// Entities, learned predicates (with append-only version history) and
// built-in functions. Values are immutable: mutators return a new library.
class ConceptLibrary {
 public:
  // Starts with the built-in comparators, arithmetic, and scene features.
  ConceptLibrary();

  bool contains(std::string_view name) const;
  std::optional<ConceptKind> kind_of(std::string_view name) const;

  bool has_entity(std::string_view name) const { return entities_.count(name) > 0; }
  const FunctionSignature* find_function(std::string_view name) const;
  const PredicateConcept* find_predicate(std::string_view name) const;
  // Highest version. Throws Error(kUnresolvedName) when missing.
  const PredicateConcept& lookup_predicate(std::string_view name) const;
  const std::vector<PredicateConcept>& history(std::string_view name) const;

  // Idempotent. Throws Error(kNameCollision) if the name is a predicate or
  // function.
  ConceptLibrary add_entity(std::string_view name) const;

  // Validates the body against this library, assigns the next version number
  // and records dependency edges. Throws kCycle, kUnresolvedName,
  // kNameCollision, kTypeError, kArityMismatch.
  ConceptLibrary add_predicate(PredicateConcept concept_def) const;

  const std::set<std::string, std::less<>>& entities() const { return entities_; }
  std::vector<std::string> predicate_names() const;
  std::vector<std::string> function_names() const;
  // Predicates ordered so that dependencies come first; ties by name.
  std::vector<std::string> topological_order() const;

  bool operator==(const ConceptLibrary& other) const {
    return entities_ == other.entities_ && predicates_ == other.predicates_;
  }

 private:
  std::set<std::string, std::less<>> entities_;
  std::map<std::string, std::vector<PredicateConcept>, std::less<>> predicates_;
  std::shared_ptr<const std::map<std::string, FunctionSignature, std::less<>>> functions_;
};

// Lowercase snake_case: "Side Walk" -> "side_walk".
std::string normalize_name(std::string_view raw);

// Type-checks a condition / sketch against the library. `params` are the
// identifiers bound inside a concept body (empty at top level, where `q` is
// the query).
Kind check_term(const dsl::Term& term, const ConceptLibrary& lib, const std::vector<Param>& params);
void check_condition(const dsl::Cond& cond, const ConceptLibrary& lib,
                     const std::vector<Param>& params = {});
void check_sketch(const dsl::Sketch& sketch, const ConceptLibrary& lib, const dsl::LabelSet& labels,
                  const std::vector<Param>& params = {});

// Learned predicates referenced by atoms, sorted.
std::vector<std::string> referenced_predicates(const dsl::Sketch& sketch, const ConceptLibrary& lib);
std::vector<std::string> referenced_predicates(const dsl::Cond& cond, const ConceptLibrary& lib);
// Bare identifiers that are neither parameters nor known entities.
std::set<std::string> unknown_entity_refs(const dsl::Sketch& sketch, const ConceptLibrary& lib,
                                          const std::vector<Param>& params);

}  // namespace prefprog::library
