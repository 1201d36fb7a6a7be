#include "prefprog/dsl/ast.hpp"

#include <algorithm>
#include <array>

namespace prefprog::dsl {

TermPtr number(double value) { return std::make_shared<Term>(Term{NumberLit{value}, {}}); }
TermPtr string_lit(std::string value) {
  return std::make_shared<Term>(Term{StringLit{std::move(value)}, {}});
}
TermPtr hole(std::string name, double lo, double hi) {
  return std::make_shared<Term>(Term{Hole{std::move(name), lo, hi}, {}});
}
TermPtr query() { return std::make_shared<Term>(Term{QueryRef{}, {}}); }
TermPtr entity(std::string name) {
  return std::make_shared<Term>(Term{EntityRef{std::move(name)}, {}});
}
TermPtr call(std::string name, std::vector<TermPtr> args) {
  return std::make_shared<Term>(Term{Call{std::move(name), std::move(args)}, {}});
}

CondPtr bool_lit(bool value) { return std::make_shared<Cond>(Cond{BoolLit{value}, {}}); }
CondPtr atom(std::string head, std::vector<TermPtr> args) {
  return std::make_shared<Cond>(Cond{Atom{std::move(head), std::move(args)}, {}});
}
CondPtr negate(CondPtr arg) { return std::make_shared<Cond>(Cond{Not{std::move(arg)}, {}}); }
CondPtr conj(std::vector<CondPtr> args) {
  return std::make_shared<Cond>(Cond{And{std::move(args)}, {}});
}
CondPtr disj(std::vector<CondPtr> args) {
  return std::make_shared<Cond>(Cond{Or{std::move(args)}, {}});
}

NodePtr leaf(std::string label) { return std::make_shared<Node>(Node{Leaf{std::move(label)}, {}}); }
NodePtr branch(CondPtr cond, NodePtr then_branch, NodePtr else_branch) {
  return std::make_shared<Node>(
      Node{Branch{std::move(cond), std::move(then_branch), std::move(else_branch)}, {}});
}

bool is_constant(const Cond& cond, bool* value) {
  if (const auto* lit = std::get_if<BoolLit>(&cond.node)) {
    if (value != nullptr) *value = lit->value;
    return true;
  }
  return false;
}

CondPtr make_not(CondPtr arg) {
  bool v = false;
  if (is_constant(*arg, &v)) return bool_lit(!v);
  return negate(std::move(arg));
}

namespace {

// Shared body of make_and/make_or: `absorbing` is false for and, true for or.
CondPtr fold_junction(std::vector<CondPtr> args, bool absorbing) {
  std::vector<CondPtr> kept;
  kept.reserve(args.size());
  for (auto& a : args) {
    bool v = false;
    if (is_constant(*a, &v)) {
      if (v == absorbing) return bool_lit(absorbing);
      continue;
    }
    // Flatten nested junctions of the same kind.
    if (!absorbing) {
      if (const auto* inner = std::get_if<And>(&a->node)) {
        kept.insert(kept.end(), inner->args.begin(), inner->args.end());
        continue;
      }
    } else if (const auto* inner = std::get_if<Or>(&a->node)) {
      kept.insert(kept.end(), inner->args.begin(), inner->args.end());
      continue;
    }
    kept.push_back(std::move(a));
  }
  if (kept.empty()) return bool_lit(!absorbing);
  if (kept.size() == 1) return kept.front();
  return absorbing ? disj(std::move(kept)) : conj(std::move(kept));
}

template <typename T>
bool ptr_vectors_equal(const std::vector<std::shared_ptr<const T>>& a,
                       const std::vector<std::shared_ptr<const T>>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(*a[i] == *b[i])) return false;
  }
  return true;
}

}  // namespace

CondPtr make_and(std::vector<CondPtr> args) { return fold_junction(std::move(args), false); }
CondPtr make_or(std::vector<CondPtr> args) { return fold_junction(std::move(args), true); }

bool operator==(const Term& a, const Term& b) {
  if (a.node.index() != b.node.index()) return false;
  return std::visit(
      [&](const auto& x) -> bool {
        using T = std::decay_t<decltype(x)>;
        const auto& y = std::get<T>(b.node);
        if constexpr (std::is_same_v<T, NumberLit>) {
          return x.value == y.value;
        } else if constexpr (std::is_same_v<T, StringLit>) {
          return x.value == y.value;
        } else if constexpr (std::is_same_v<T, Hole>) {
          return x.name == y.name && x.lo == y.lo && x.hi == y.hi;
        } else if constexpr (std::is_same_v<T, QueryRef>) {
          return true;
        } else if constexpr (std::is_same_v<T, EntityRef>) {
          return x.name == y.name;
        } else {
          return x.name == y.name && ptr_vectors_equal(x.args, y.args);
        }
      },
      a.node);
}

bool operator==(const Cond& a, const Cond& b) {
  if (a.node.index() != b.node.index()) return false;
  return std::visit(
      [&](const auto& x) -> bool {
        using T = std::decay_t<decltype(x)>;
        const auto& y = std::get<T>(b.node);
        if constexpr (std::is_same_v<T, BoolLit>) {
          return x.value == y.value;
        } else if constexpr (std::is_same_v<T, Atom>) {
          return x.head == y.head && ptr_vectors_equal(x.args, y.args);
        } else if constexpr (std::is_same_v<T, Not>) {
          return *x.arg == *y.arg;
        } else {
          return ptr_vectors_equal(x.args, y.args);
        }
      },
      a.node);
}

bool operator==(const Node& a, const Node& b) {
  if (a.node.index() != b.node.index()) return false;
  if (const auto* la = std::get_if<Leaf>(&a.node)) {
    return la->label == std::get<Leaf>(b.node).label;
  }
  const auto& ba = std::get<Branch>(a.node);
  const auto& bb = std::get<Branch>(b.node);
  return *ba.cond == *bb.cond && *ba.then_branch == *bb.then_branch &&
         *ba.else_branch == *bb.else_branch;
}

bool operator==(const Sketch& a, const Sketch& b) {
  if (!a.root || !b.root) return a.root == b.root;
  return *a.root == *b.root;
}

bool is_comparator(std::string_view name) {
  static constexpr std::array<std::string_view, 5> kComparators = {"<", "<=", "=", ">=", ">"};
  return std::find(kComparators.begin(), kComparators.end(), name) != kComparators.end();
}

}  // namespace prefprog::dsl
