#pragma once

// AST for preference programs: a decision tree whose internal nodes are
// boolean conditions over neuro-symbolic atoms and whose leaves are labels.
// Nodes are immutable and shared; copying a Sketch is cheap.

#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace prefprog::dsl {

struct SourceSpan {
  int line = 0;
  int column = 0;
};

inline constexpr double kDefaultHoleLo = 0.0;
inline constexpr double kDefaultHoleHi = 1e6;

struct Term;
using TermPtr = std::shared_ptr<const Term>;

struct NumberLit {
  double value = 0.0;
};
struct StringLit {
  std::string value;
};
struct Hole {
  std::string name;
  double lo = kDefaultHoleLo;
  double hi = kDefaultHoleHi;
};
struct QueryRef {};
// A bare identifier in argument position: an entity name, or a predicate
// parameter when evaluated inside a concept body.
struct EntityRef {
  std::string name;
};
struct Call {
  std::string name;
  std::vector<TermPtr> args;
};

struct Term {
  std::variant<NumberLit, StringLit, Hole, QueryRef, EntityRef, Call> node;
  SourceSpan span;
};

struct Cond;
using CondPtr = std::shared_ptr<const Cond>;

struct BoolLit {
  bool value = false;
};
struct Atom {
  std::string head;
  std::vector<TermPtr> args;
};
struct Not {
  CondPtr arg;
};
struct And {
  std::vector<CondPtr> args;
};
struct Or {
  std::vector<CondPtr> args;
};

struct Cond {
  std::variant<BoolLit, Atom, Not, And, Or> node;
  SourceSpan span;
};

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Leaf {
  std::string label;
};
struct Branch {
  CondPtr cond;
  NodePtr then_branch;
  NodePtr else_branch;
};

struct Node {
  std::variant<Leaf, Branch> node;
  SourceSpan span;
};

// A decision-tree program that may contain numeric holes.
struct Sketch {
  NodePtr root;
};

// Hole name -> value.
using Assignment = std::map<std::string, double>;

// Factories. Spans default to "unknown".
TermPtr number(double value);
TermPtr string_lit(std::string value);
TermPtr hole(std::string name, double lo = kDefaultHoleLo,
             double hi = kDefaultHoleHi);
TermPtr query();
TermPtr entity(std::string name);
TermPtr call(std::string name, std::vector<TermPtr> args);

CondPtr bool_lit(bool value);
CondPtr atom(std::string head, std::vector<TermPtr> args);
CondPtr negate(CondPtr arg);
CondPtr conj(std::vector<CondPtr> args);
CondPtr disj(std::vector<CondPtr> args);

NodePtr leaf(std::string label);
NodePtr branch(CondPtr cond, NodePtr then_branch, NodePtr else_branch);

// Constant-folding constructors: drop neutral elements, collapse absorbing
// ones, unwrap single-child and/or. Used by partial evaluation and guards.
CondPtr make_not(CondPtr arg);
CondPtr make_and(std::vector<CondPtr> args);
CondPtr make_or(std::vector<CondPtr> args);

// Structural equality; source spans are ignored.
bool operator==(const Term& a, const Term& b);
bool operator==(const Cond& a, const Cond& b);
bool operator==(const Node& a, const Node& b);
bool operator==(const Sketch& a, const Sketch& b);

bool is_comparator(std::string_view name);
bool is_constant(const Cond& cond, bool* value = nullptr);

}  // namespace prefprog::dsl
