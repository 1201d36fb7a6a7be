#pragma once

// Concrete s-expression syntax for preference programs.
//
//   program := node
//   node    := (leaf LABEL) | (if cond node node)
//   cond    := true | false | (and cond+) | (or cond+) | (not cond)
//            | (HEAD term*)
//   term    := NUMBER | "string" | ??hole | ??hole[lo,hi] | q | IDENT
//            | (FUNCTION term*)
//
// The printer is canonical: conditions on one line, one branch per line,
// two-space indentation.

#include <string>
#include <string_view>

#include "prefprog/dsl/ast.hpp"
#include "prefprog/dsl/program.hpp"

namespace prefprog::dsl {

// Throws SyntaxError (line/column) or Error(kUnknownLabel).
Sketch parse_program(std::string_view text, const LabelSet& labels = LabelSet());
CondPtr parse_condition(std::string_view text);
TermPtr parse_term(std::string_view text);

std::string print_program(const Sketch& sketch);
std::string print_condition(const Cond& cond);
std::string print_term(const Term& term);

// Shortest round-trip decimal that always reads back as a number literal
// ("3.0", "0.1", "1e+20").
std::string format_number(double value);

}  // namespace prefprog::dsl
