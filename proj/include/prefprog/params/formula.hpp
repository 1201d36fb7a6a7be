#pragma once

#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "prefprog/dsl/ast.hpp"
#include "prefprog/dsl/program.hpp"
#include "prefprog/library/concept_library.hpp"
#include "prefprog/params/demonstration.hpp"
#include "prefprog/scene/perception.hpp"

namespace prefprog::params {

struct WeightedClause {
  dsl::CondPtr formula;  // over hole-only atoms
  int weight = 1;
  std::string origin;    // "<demo>#<query>:+<label>" or ":-<label>"
};

struct WeightedFormula {
  std::vector<WeightedClause> clauses;  // sorted by origin
  std::map<std::string, std::pair<double, double>> holes;  // declared bounds

  int total_weight() const;
};

std::string clause_origin(std::string_view demo_id, std::size_t query_index, bool positive,
                          std::string_view label);
// Demo id part of an origin.
std::string origin_demo(std::string_view origin);

// One clause asserting the demonstrated label's guard and one negated guard
// for every other label, per labeled query. Clauses are sorted by origin so
// the result does not depend on demo order.
WeightedFormula build_constraint(const dsl::Sketch& sketch, const std::vector<Demonstration>& demos,
                                 const library::ConceptLibrary& lib, const dsl::LabelSet& labels,
                                 const scene::PerceptionProvider& provider);

// One clause per line: "<weight> <origin> <formula>".
std::string dump_formula(const WeightedFormula& wf);

}  // namespace prefprog::params
