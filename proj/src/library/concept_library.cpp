#include "prefprog/library/concept_library.hpp"

#include <algorithm>
#include <cctype>
#include <functional>

#include "prefprog/error.hpp"

namespace prefprog::library {

namespace {

using FunctionTable = std::map<std::string, FunctionSignature, std::less<>>;

std::shared_ptr<const FunctionTable> builtin_functions() {
  static const auto table = [] {
    auto t = std::make_shared<FunctionTable>();
    auto add = [&](std::string name, std::vector<Kind> params, Kind result, bool partition = false) {
      t->emplace(name, FunctionSignature{name, std::move(params), result, partition});
    };
    for (const char* op : {"<", "<=", "=", ">=", ">"}) add(op, {Kind::kNumber, Kind::kNumber}, Kind::kBool);
    for (const char* op : {"+", "-", "*", "/", "min", "max"}) {
      add(op, {Kind::kNumber, Kind::kNumber}, Kind::kNumber);
    }
    add("abs", {Kind::kNumber}, Kind::kNumber);
    add("dist_to", {Kind::kQuery, Kind::kEntity}, Kind::kNumber);
    add("depth_at", {Kind::kQuery}, Kind::kNumber);
    add("project_ground", {Kind::kQuery}, Kind::kQuery);
    add("is_on", {Kind::kQuery, Kind::kEntity}, Kind::kBool, true);
    add("in_region", {Kind::kQuery, Kind::kEntity}, Kind::kBool);
    return std::shared_ptr<const FunctionTable>(std::move(t));
  }();
  return table;
}

const Param* find_param(const std::vector<Param>& params, std::string_view name) {
  for (const auto& p : params) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

void expect_kind(Kind want, Kind got, const std::string& where) {
  if (want != got) {
    throw Error(ErrorCode::kTypeError, where + ": expected " + std::string(kind_name(want)) + ", got " +
                                           std::string(kind_name(got)));
  }
}

void check_args(const std::string& head, const std::vector<Kind>& want,
                const std::vector<dsl::TermPtr>& args, const ConceptLibrary& lib,
                const std::vector<Param>& params) {
  if (want.size() != args.size()) {
    throw Error(ErrorCode::kArityMismatch, "'" + head + "' takes " + std::to_string(want.size()) +
                                               " argument(s), got " + std::to_string(args.size()));
  }
  for (std::size_t i = 0; i < args.size(); ++i) {
    expect_kind(want[i], check_term(*args[i], lib, params),
                "argument " + std::to_string(i + 1) + " of '" + head + "'");
  }
}

void visit_atoms(const dsl::Cond& cond, const std::function<void(const dsl::Atom&)>& fn) {
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, dsl::Atom>) {
          fn(n);
        } else if constexpr (std::is_same_v<T, dsl::Not>) {
          visit_atoms(*n.arg, fn);
        } else if constexpr (std::is_same_v<T, dsl::And> || std::is_same_v<T, dsl::Or>) {
          for (const auto& a : n.args) visit_atoms(*a, fn);
        }
      },
      cond.node);
}

void visit_conditions(const dsl::Node& node, const std::function<void(const dsl::Cond&)>& fn) {
  if (const auto* b = std::get_if<dsl::Branch>(&node.node)) {
    fn(*b->cond);
    visit_conditions(*b->then_branch, fn);
    visit_conditions(*b->else_branch, fn);
  }
}

void visit_terms(const dsl::Term& term, const std::function<void(const dsl::Term&)>& fn) {
  fn(term);
  if (const auto* c = std::get_if<dsl::Call>(&term.node)) {
    for (const auto& a : c->args) visit_terms(*a, fn);
  }
}

}  // namespace

std::string_view kind_name(Kind kind) {
  switch (kind) {
    case Kind::kNumber: return "number";
    case Kind::kBool: return "bool";
    case Kind::kEntity: return "entity";
    case Kind::kQuery: return "query";
  }
  return "?";
}

Kind kind_from_name(std::string_view name) {
  if (name == "number") return Kind::kNumber;
  if (name == "bool") return Kind::kBool;
  if (name == "entity") return Kind::kEntity;
  if (name == "query") return Kind::kQuery;
  throw Error(ErrorCode::kSchema, "unknown parameter kind '" + std::string(name) + "'");
}

std::string normalize_name(std::string_view raw) {
  std::string out;
  for (char ch : raw) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      out.push_back(static_cast<char>(std::tolower(c)));
    } else if ((ch == '_' || ch == ' ' || ch == '-') && !out.empty() && out.back() != '_') {
      out.push_back('_');
    }
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

ConceptLibrary::ConceptLibrary() : functions_(builtin_functions()) {}

bool ConceptLibrary::contains(std::string_view name) const { return kind_of(name).has_value(); }

std::optional<ConceptKind> ConceptLibrary::kind_of(std::string_view name) const {
  if (entities_.count(name) > 0) return ConceptKind::kEntity;
  if (predicates_.count(name) > 0) return ConceptKind::kPredicate;
  if (functions_->count(name) > 0) return ConceptKind::kFunction;
  return std::nullopt;
}

const FunctionSignature* ConceptLibrary::find_function(std::string_view name) const {
  auto it = functions_->find(name);
  return it == functions_->end() ? nullptr : &it->second;
}

const PredicateConcept* ConceptLibrary::find_predicate(std::string_view name) const {
  auto it = predicates_.find(name);
  return it == predicates_.end() ? nullptr : &it->second.back();
}

const PredicateConcept& ConceptLibrary::lookup_predicate(std::string_view name) const {
  const auto* p = find_predicate(name);
  if (p == nullptr) throw Error(ErrorCode::kUnresolvedName, "no predicate named '" + std::string(name) + "'");
  return *p;
}

const std::vector<PredicateConcept>& ConceptLibrary::history(std::string_view name) const {
  auto it = predicates_.find(name);
  if (it == predicates_.end()) {
    throw Error(ErrorCode::kUnresolvedName, "no predicate named '" + std::string(name) + "'");
  }
  return it->second;
}

ConceptLibrary ConceptLibrary::add_entity(std::string_view raw) const {
  std::string name = normalize_name(raw);
  if (name.empty()) throw Error(ErrorCode::kSchema, "empty entity name");
  auto kind = kind_of(name);
  if (kind == ConceptKind::kEntity) return *this;
  if (kind.has_value()) {
    throw Error(ErrorCode::kNameCollision, "'" + name + "' is already a " +
                                               (kind == ConceptKind::kPredicate ? "predicate" : "function"));
  }
  ConceptLibrary next = *this;
  next.entities_.insert(std::move(name));
  return next;
}

ConceptLibrary ConceptLibrary::add_predicate(PredicateConcept def) const {
  if (def.name.empty() || normalize_name(def.name) != def.name) {
    throw Error(ErrorCode::kSchema, "predicate name '" + def.name + "' is not snake_case");
  }
  auto kind = kind_of(def.name);
  if (kind.has_value() && kind != ConceptKind::kPredicate) {
    throw Error(ErrorCode::kNameCollision, "'" + def.name + "' is already an " +
                                               (kind == ConceptKind::kEntity ? "entity" : "built-in function"));
  }
  std::set<std::string> seen;
  for (const auto& p : def.params) {
    if (!seen.insert(p.name).second) {
      throw Error(ErrorCode::kSchema, "duplicate parameter '" + p.name + "' in '" + def.name + "'");
    }
    if (p.kind == Kind::kQuery && p.name != "q") {
      throw Error(ErrorCode::kSchema, "query parameter of '" + def.name + "' must be named q");
    }
    if (p.kind == Kind::kBool) {
      throw Error(ErrorCode::kSchema, "boolean parameters are not supported");
    }
  }

  // Self-reference has to be caught before name resolution, since on first
  // definition the name is not yet in the library.
  const auto& body = def.body.sketch();
  bool self_ref = false;
  visit_conditions(*body.root, [&](const dsl::Cond& c) {
    visit_atoms(c, [&](const dsl::Atom& a) { self_ref = self_ref || a.head == def.name; });
  });
  if (self_ref) throw Error(ErrorCode::kCycle, "predicate '" + def.name + "' refers to itself");

  check_sketch(body, *this, dsl::LabelSet::boolean(), def.params);
  def.depends_on = referenced_predicates(body, *this);

  // Re-defining an existing predicate must not close a cycle through its
  // dependents.
  std::function<bool(const std::string&, std::set<std::string>&)> reaches =
      [&](const std::string& from, std::set<std::string>& visited) {
        if (from == def.name) return true;
        if (!visited.insert(from).second) return false;
        const auto* p = find_predicate(from);
        if (p == nullptr) return false;
        return std::any_of(p->depends_on.begin(), p->depends_on.end(),
                           [&](const std::string& d) { return reaches(d, visited); });
      };
  for (const auto& dep : def.depends_on) {
    std::set<std::string> visited;
    if (reaches(dep, visited)) {
      throw Error(ErrorCode::kCycle, "adding '" + def.name + "' would create a cycle through '" + dep + "'");
    }
  }

  ConceptLibrary next = *this;
  auto& versions = next.predicates_[def.name];
  def.version = static_cast<int>(versions.size()) + 1;
  versions.push_back(std::move(def));
  return next;
}

std::vector<std::string> ConceptLibrary::predicate_names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : predicates_) out.push_back(name);
  return out;
}

std::vector<std::string> ConceptLibrary::function_names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : *functions_) out.push_back(name);
  return out;
}

std::vector<std::string> ConceptLibrary::topological_order() const {
  std::vector<std::string> order;
  std::set<std::string> done;
  std::function<void(const std::string&)> visit = [&](const std::string& name) {
    if (done.count(name) > 0) return;
    done.insert(name);
    for (const auto& dep : lookup_predicate(name).depends_on) visit(dep);
    order.push_back(name);
  };
  for (const auto& [name, _] : predicates_) visit(name);
  return order;
}

Kind check_term(const dsl::Term& term, const ConceptLibrary& lib, const std::vector<Param>& params) {
  return std::visit(
      [&](const auto& n) -> Kind {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, dsl::NumberLit> || std::is_same_v<T, dsl::Hole>) {
          return Kind::kNumber;
        } else if constexpr (std::is_same_v<T, dsl::StringLit>) {
          if (!lib.has_entity(n.value)) {
            throw Error(ErrorCode::kUnresolvedName, "unknown entity \"" + n.value + "\"");
          }
          return Kind::kEntity;
        } else if constexpr (std::is_same_v<T, dsl::QueryRef>) {
          if (!params.empty() && find_param(params, "q") == nullptr) {
            throw Error(ErrorCode::kUnresolvedName, "q is not a parameter of this concept");
          }
          return Kind::kQuery;
        } else if constexpr (std::is_same_v<T, dsl::EntityRef>) {
          if (const auto* p = find_param(params, n.name)) return p->kind;
          if (lib.has_entity(n.name)) return Kind::kEntity;
          throw Error(ErrorCode::kUnresolvedName, "unknown name '" + n.name + "'");
        } else {
          const auto* f = lib.find_function(n.name);
          if (f == nullptr) throw Error(ErrorCode::kUnresolvedName, "unknown function '" + n.name + "'");
          if (f->result == Kind::kBool) {
            throw Error(ErrorCode::kTypeError, "'" + n.name + "' is boolean and cannot be used as a term");
          }
          check_args(n.name, f->params, n.args, lib, params);
          return f->result;
        }
      },
      term.node);
}

void check_condition(const dsl::Cond& cond, const ConceptLibrary& lib, const std::vector<Param>& params) {
  visit_atoms(cond, [&](const dsl::Atom& a) {
    if (const auto* f = lib.find_function(a.head)) {
      if (f->result != Kind::kBool) {
        throw Error(ErrorCode::kTypeError, "'" + a.head + "' is not boolean-valued");
      }
      check_args(a.head, f->params, a.args, lib, params);
      return;
    }
    if (const auto* p = lib.find_predicate(a.head)) {
      std::vector<Kind> kinds;
      for (const auto& prm : p->params) kinds.push_back(prm.kind);
      check_args(a.head, kinds, a.args, lib, params);
      return;
    }
    throw Error(ErrorCode::kUnresolvedName, "unknown predicate '" + a.head + "'");
  });
}

void check_sketch(const dsl::Sketch& sketch, const ConceptLibrary& lib, const dsl::LabelSet& labels,
                  const std::vector<Param>& params) {
  for (const auto& l : dsl::leaf_labels(sketch)) {
    if (!labels.contains(l)) throw Error(ErrorCode::kUnknownLabel, "label '" + l + "' is not in the label set");
  }
  visit_conditions(*sketch.root, [&](const dsl::Cond& c) { check_condition(c, lib, params); });
}

std::vector<std::string> referenced_predicates(const dsl::Cond& cond, const ConceptLibrary& lib) {
  std::set<std::string> names;
  visit_atoms(cond, [&](const dsl::Atom& a) {
    if (lib.find_predicate(a.head) != nullptr) names.insert(a.head);
  });
  return {names.begin(), names.end()};
}

std::vector<std::string> referenced_predicates(const dsl::Sketch& sketch, const ConceptLibrary& lib) {
  std::set<std::string> names;
  visit_conditions(*sketch.root, [&](const dsl::Cond& c) {
    for (auto& n : referenced_predicates(c, lib)) names.insert(std::move(n));
  });
  return {names.begin(), names.end()};
}

std::set<std::string> unknown_entity_refs(const dsl::Sketch& sketch, const ConceptLibrary& lib,
                                          const std::vector<Param>& params) {
  std::set<std::string> out;
  visit_conditions(*sketch.root, [&](const dsl::Cond& c) {
    visit_atoms(c, [&](const dsl::Atom& a) {
      for (const auto& arg : a.args) {
        visit_terms(*arg, [&](const dsl::Term& t) {
          const std::string* name = nullptr;
          if (const auto* e = std::get_if<dsl::EntityRef>(&t.node)) name = &e->name;
          if (const auto* s = std::get_if<dsl::StringLit>(&t.node)) name = &s->value;
          if (name != nullptr && find_param(params, *name) == nullptr && !lib.contains(*name)) {
            out.insert(*name);
          }
        });
      }
    });
  });
  return out;
}

}  // namespace prefprog::library
