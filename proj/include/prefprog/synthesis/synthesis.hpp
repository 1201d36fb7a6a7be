#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "prefprog/dsl/ast.hpp"
#include "prefprog/dsl/program.hpp"
#include "prefprog/library/concept_library.hpp"
#include "prefprog/synthesis/lm_provider.hpp"

namespace prefprog::synthesis {

// Atom over a library predicate. Arguments are written as identifiers: "q"
// for the query, numbers as decimal text, anything else an entity.
struct Literal {
  std::string predicate;
  std::vector<std::string> args;
  bool negated = false;
  bool operator==(const Literal&) const = default;
};

using Clause = std::vector<Literal>;  // disjunction

struct CnfFormula {
  std::vector<Clause> clauses;  // conjunction
  bool operator==(const CnfFormula&) const = default;
};

dsl::CondPtr literal_atom(const Literal& literal);
// Map from printed atom, e.g. "(is_far q car)", to the condition text that
// replaces it in sketches.
using Expansions = std::map<std::string, std::string>;
dsl::CondPtr cnf_condition(const CnfFormula& phi, const Expansions& expansions = {});
// "is_on(q, sidewalk) & !in_way(q)"; clauses with several literals are
// parenthesized and joined by " | ".
std::string print_cnf(const CnfFormula& phi);
nlohmann::json cnf_to_json(const CnfFormula& phi);
CnfFormula cnf_from_json(const nlohmann::json& doc);

struct PredicateMention {
  std::string name;
  std::vector<library::Param> params;
  bool operator==(const PredicateMention&) const = default;
};

// Summary of a library handed to providers.
nlohmann::json library_context(const library::ConceptLibrary& lib);

// Normalized, de-duplicated, in order of first mention.
std::vector<std::string> extract_entities(std::string_view explanation, const library::ConceptLibrary& lib,
                                          const LmProvider& provider);
// Signatures are confirmed against the library when the name is known there
// (kArityMismatch on disagreement).
std::vector<PredicateMention> extract_predicates(std::string_view explanation, const library::ConceptLibrary& lib,
                                                 const LmProvider& provider);

struct NlCnf {
  CnfFormula phi;
  std::string label;
};

// Throws kUnresolvedPredicate when a literal names something the library does
// not define, kUnknownLabel when the label is outside `labels`, and the usual
// type errors when a literal is ill-typed.
NlCnf nl_to_cnf(std::string_view explanation, const library::ConceptLibrary& lib, const dsl::LabelSet& labels,
                const LmProvider& provider);

// Rejects (kContractViolation) a sketch that can return something other than
// `label` while `phi` holds. Atoms are treated as propositional variables
// keyed by their printed form; atoms of a partitioning predicate that share a
// first argument are mutually exclusive. Up to 12 distinct atoms are
// enumerated exhaustively, beyond that `samples` random phi-satisfying
// valuations are drawn.
void check_sketch_contract(const dsl::Sketch& sketch, const dsl::Cond& phi, const std::string& label,
                           const library::ConceptLibrary& lib, int samples = 1000, std::uint64_t seed = 0);

// Second stage: asks the provider for a sketch that returns `label` whenever
// `phi` holds, type-checks it and enforces the contract above.
dsl::Sketch update_sketch(const std::optional<dsl::Sketch>& old, const CnfFormula& phi, const std::string& label,
                          const dsl::LabelSet& labels, const library::ConceptLibrary& lib,
                          const LmProvider& provider);

enum class SynthMode { kTwoStage, kDirect, kCodeAsPolicies };
std::string_view synth_mode_name(SynthMode mode);
SynthMode synth_mode_from_name(std::string_view name);

// Explanation to sketch. kTwoStage runs nl_to_cnf then update_sketch; kDirect
// asks for the sketch in one call; kCodeAsPolicies asks for an ordered rule
// list and assembles the decision chain locally. All modes are held to the
// same contract.
dsl::Sketch synthesize_sketch(SynthMode mode, const std::optional<dsl::Sketch>& old, std::string_view explanation,
                              const library::ConceptLibrary& lib, const dsl::LabelSet& labels,
                              const LmProvider& provider);

struct PredicateDefinition {
  std::vector<library::Param> params;
  std::optional<dsl::Sketch> body;    // hole-free: usable as-is
  std::optional<dsl::Sketch> sketch;  // with holes: needs demonstrations
};

// Auxiliary predicate from a natural-language description. Returns nullopt
// when the provider knows no rule for `name`.
std::optional<PredicateDefinition> define_predicate(std::string_view name, std::string_view explanation,
                                                    const library::ConceptLibrary& lib, const LmProvider& provider);

}  // namespace prefprog::synthesis
