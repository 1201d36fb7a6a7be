#pragma once

#include <string>

#include "prefprog/dsl/ast.hpp"
#include "prefprog/dsl/program.hpp"
#include "prefprog/library/concept_library.hpp"
#include "prefprog/params/demonstration.hpp"
#include "prefprog/scene/perception.hpp"

namespace prefprog::params {

struct Residual {
  dsl::Sketch sketch;  // only hole-dependent atoms remain
  std::string label;   // the query's demonstrated label
};

// Folds every hole-free subterm of `sketch` against query `query_index` of
// `demo`. Predicates called with hole-dependent arguments are inlined.
// Evaluation errors carry the failing term's source position.
Residual partial_eval(const dsl::Sketch& sketch, const Demonstration& demo, std::size_t query_index,
                      const library::ConceptLibrary& lib, const scene::PerceptionProvider& provider);

// Condition under which the sketch returns `label`: disjunction over
// root-to-leaf paths ending in `label` of the branch conditions along the
// path (negated on else edges).
dsl::CondPtr guard_formula(const dsl::Sketch& sketch, const std::string& label);
dsl::CondPtr guard_formula(const dsl::Node& node, const std::string& label);

// Evaluates a hole-only condition under a total assignment.
bool evaluate_residual_condition(const dsl::Cond& cond, const dsl::Assignment& assignment);
// Label reached in a residual sketch under a total assignment.
std::string evaluate_residual(const dsl::Sketch& residual, const dsl::Assignment& assignment);

}  // namespace prefprog::params
