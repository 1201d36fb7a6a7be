#include "prefprog/params/formula.hpp"

#include <algorithm>
#include <cstdio>

#include "prefprog/dsl/syntax.hpp"
#include "prefprog/params/partial_eval.hpp"

namespace prefprog::params {

int WeightedFormula::total_weight() const {
  int total = 0;
  for (const auto& c : clauses) total += c.weight;
  return total;
}

std::string clause_origin(std::string_view demo_id, std::size_t query_index, bool positive,
                          std::string_view label) {
  char idx[16];
  std::snprintf(idx, sizeof idx, "%03zu", query_index);
  return std::string(demo_id) + "#" + idx + ":" + (positive ? "+" : "-") + std::string(label);
}

std::string origin_demo(std::string_view origin) {
  auto pos = origin.rfind('#');
  return std::string(pos == std::string_view::npos ? origin : origin.substr(0, pos));
}

WeightedFormula build_constraint(const dsl::Sketch& sketch, const std::vector<Demonstration>& demos,
                                 const library::ConceptLibrary& lib, const dsl::LabelSet& labels,
                                 const scene::PerceptionProvider& provider) {
  WeightedFormula wf;
  wf.holes = dsl::hole_bounds(sketch);
  for (const auto& demo : demos) {
    for (std::size_t qi = 0; qi < demo.queries.size(); ++qi) {
      Residual res = partial_eval(sketch, demo, qi, lib, provider);
      for (const auto& label : labels.labels()) {
        dsl::CondPtr guard = guard_formula(res.sketch, label);
        if (label == res.label) {
          wf.clauses.push_back({guard, 1, clause_origin(demo.id, qi, true, label)});
        } else {
          wf.clauses.push_back({dsl::make_not(guard), 1, clause_origin(demo.id, qi, false, label)});
        }
      }
    }
  }
  std::stable_sort(wf.clauses.begin(), wf.clauses.end(),
                   [](const WeightedClause& a, const WeightedClause& b) { return a.origin < b.origin; });
  return wf;
}

std::string dump_formula(const WeightedFormula& wf) {
  std::string out;
  for (const auto& c : wf.clauses) {
    out += std::to_string(c.weight) + " " + c.origin + " " + dsl::print_condition(*c.formula) + "\n";
  }
  return out;
}

}  // namespace prefprog::params
