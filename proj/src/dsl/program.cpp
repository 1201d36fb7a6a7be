#include "prefprog/dsl/program.hpp"

#include <algorithm>

#include "prefprog/dsl/syntax.hpp"
#include "prefprog/error.hpp"

namespace prefprog::dsl {

LabelSet::LabelSet(std::vector<std::string> labels) : labels_(std::move(labels)) {
  if (labels_.empty()) throw Error(ErrorCode::kUnknownLabel, "label set must not be empty");
  std::set<std::string> seen;
  for (const auto& l : labels_) {
    if (!seen.insert(l).second) {
      throw Error(ErrorCode::kUnknownLabel, "duplicate label '" + l + "'");
    }
  }
}

bool LabelSet::contains(std::string_view label) const {
  return std::find(labels_.begin(), labels_.end(), label) != labels_.end();
}

std::size_t LabelSet::index_of(std::string_view label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) {
    throw Error(ErrorCode::kUnknownLabel, "label '" + std::string(label) + "' not in label set");
  }
  return static_cast<std::size_t>(it - labels_.begin());
}

namespace {

void collect_holes(const Term& term, std::map<std::string, std::pair<double, double>>& out) {
  if (const auto* h = std::get_if<Hole>(&term.node)) {
    auto [it, inserted] = out.emplace(h->name, std::make_pair(h->lo, h->hi));
    if (!inserted && (it->second.first != h->lo || it->second.second != h->hi)) {
      throw Error(ErrorCode::kHoleBounds,
                  "hole '" + h->name + "' declared with conflicting bounds");
    }
  } else if (const auto* c = std::get_if<Call>(&term.node)) {
    for (const auto& a : c->args) collect_holes(*a, out);
  }
}

void collect_holes(const Cond& cond, std::map<std::string, std::pair<double, double>>& out) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, Atom>) {
          for (const auto& a : n.args) collect_holes(*a, out);
        } else if constexpr (std::is_same_v<T, Not>) {
          collect_holes(*n.arg, out);
        } else if constexpr (std::is_same_v<T, And> || std::is_same_v<T, Or>) {
          for (const auto& a : n.args) collect_holes(*a, out);
        }
      },
      cond.node);
}

void collect_holes(const Node& node, std::map<std::string, std::pair<double, double>>& out) {
  if (const auto* b = std::get_if<Branch>(&node.node)) {
    collect_holes(*b->cond, out);
    collect_holes(*b->then_branch, out);
    collect_holes(*b->else_branch, out);
  }
}

template <typename T>
std::set<std::string> names_of(const T& root) {
  std::map<std::string, std::pair<double, double>> bounds;
  collect_holes(root, bounds);
  std::set<std::string> names;
  for (const auto& [name, _] : bounds) names.insert(name);
  return names;
}

TermPtr substitute_term(const TermPtr& term, const Assignment& a) {
  if (const auto* h = std::get_if<Hole>(&term->node)) {
    auto it = a.find(h->name);
    if (it == a.end()) return term;
    if (it->second < h->lo || it->second > h->hi) {
      throw Error(ErrorCode::kHoleBounds, "value " + format_number(it->second) + " for hole '" +
                                              h->name + "' outside [" + format_number(h->lo) +
                                              ", " + format_number(h->hi) + "]");
    }
    return std::make_shared<Term>(Term{NumberLit{it->second}, term->span});
  }
  if (const auto* c = std::get_if<Call>(&term->node)) {
    std::vector<TermPtr> args;
    args.reserve(c->args.size());
    bool changed = false;
    for (const auto& arg : c->args) {
      args.push_back(substitute_term(arg, a));
      changed = changed || args.back() != arg;
    }
    if (!changed) return term;
    return std::make_shared<Term>(Term{Call{c->name, std::move(args)}, term->span});
  }
  return term;
}

NodePtr substitute_node(const NodePtr& node, const Assignment& a) {
  const auto* b = std::get_if<Branch>(&node->node);
  if (b == nullptr) return node;
  auto cond = substitute(b->cond, a);
  auto then_branch = substitute_node(b->then_branch, a);
  auto else_branch = substitute_node(b->else_branch, a);
  if (cond == b->cond && then_branch == b->then_branch && else_branch == b->else_branch) {
    return node;
  }
  return std::make_shared<Node>(Node{Branch{cond, then_branch, else_branch}, node->span});
}

void collect_labels(const Node& node, std::vector<std::string>& out) {
  if (const auto* l = std::get_if<Leaf>(&node.node)) {
    out.push_back(l->label);
    return;
  }
  const auto& b = std::get<Branch>(node.node);
  collect_labels(*b.then_branch, out);
  collect_labels(*b.else_branch, out);
}

}  // namespace

std::set<std::string> free_holes(const Sketch& sketch) { return names_of(*sketch.root); }
std::set<std::string> free_holes(const Cond& cond) { return names_of(cond); }
std::set<std::string> free_holes(const Term& term) { return names_of(term); }

std::map<std::string, std::pair<double, double>> hole_bounds(const Sketch& sketch) {
  std::map<std::string, std::pair<double, double>> out;
  collect_holes(*sketch.root, out);
  return out;
}

CondPtr substitute(const CondPtr& cond, const Assignment& a) {
  return std::visit(
      [&](const auto& n) -> CondPtr {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, BoolLit>) {
          return cond;
        } else if constexpr (std::is_same_v<T, Atom>) {
          std::vector<TermPtr> args;
          bool changed = false;
          for (const auto& arg : n.args) {
            args.push_back(substitute_term(arg, a));
            changed = changed || args.back() != arg;
          }
          if (!changed) return cond;
          return std::make_shared<Cond>(Cond{Atom{n.head, std::move(args)}, cond->span});
        } else if constexpr (std::is_same_v<T, Not>) {
          auto inner = substitute(n.arg, a);
          if (inner == n.arg) return cond;
          return std::make_shared<Cond>(Cond{Not{inner}, cond->span});
        } else {
          std::vector<CondPtr> args;
          bool changed = false;
          for (const auto& arg : n.args) {
            args.push_back(substitute(arg, a));
            changed = changed || args.back() != arg;
          }
          if (!changed) return cond;
          return std::make_shared<Cond>(Cond{T{std::move(args)}, cond->span});
        }
      },
      cond->node);
}

Sketch substitute(const Sketch& sketch, const Assignment& assignment) {
  return Sketch{substitute_node(sketch.root, assignment)};
}

std::vector<std::string> leaf_labels(const Sketch& sketch) {
  std::vector<std::string> out;
  collect_labels(*sketch.root, out);
  return out;
}

Program Program::from_sketch(Sketch sketch) {
  if (!sketch.root) throw Error(ErrorCode::kSchema, "program has no root");
  auto holes = free_holes(sketch);
  if (!holes.empty()) {
    throw Error(ErrorCode::kUnboundHole,
                "program still contains hole '" + *holes.begin() + "'");
  }
  return Program(std::move(sketch));
}

}  // namespace prefprog::dsl
