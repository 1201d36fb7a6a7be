#include "prefprog/params/partial_eval.hpp"

#include <map>
#include <variant>

#include "prefprog/dsl/evaluator.hpp"
#include "prefprog/error.hpp"

namespace prefprog::params {

using dsl::CondPtr;
using dsl::NodePtr;
using dsl::TermPtr;
using dsl::Value;

namespace {

// A partially evaluated term: a concrete value or a residual term over holes.
using PVal = std::variant<Value, TermPtr>;
using Bindings = std::map<std::string, PVal>;

TermPtr to_term(const PVal& v) {
  if (const auto* t = std::get_if<TermPtr>(&v)) return *t;
  const auto& value = std::get<Value>(v);
  if (const auto* d = std::get_if<double>(&value)) return dsl::number(*d);
  if (const auto* e = std::get_if<dsl::EntityName>(&value)) return dsl::entity(e->name);
  throw Error(ErrorCode::kUnsupportedAtom, "cannot keep " + dsl::describe(value) + " in a residual term");
}

class PartialEvaluator {
 public:
  PartialEvaluator(const dsl::Evaluator& ev, scene::Cell q) : ev_(ev), q_(q) {}

  NodePtr node(const dsl::Node& n, const Bindings* b) const {
    if (const auto* leaf = std::get_if<dsl::Leaf>(&n.node)) return dsl::leaf(leaf->label);
    const auto& br = std::get<dsl::Branch>(n.node);
    CondPtr c = cond(*br.cond, b);
    bool value = false;
    if (dsl::is_constant(*c, &value)) return node(value ? *br.then_branch : *br.else_branch, b);
    NodePtr t = node(*br.then_branch, b);
    NodePtr e = node(*br.else_branch, b);
    if (*t == *e) return t;
    return dsl::branch(std::move(c), std::move(t), std::move(e));
  }

  CondPtr cond(const dsl::Cond& c, const Bindings* b) const {
    return std::visit(
        [&](const auto& n) -> CondPtr {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, dsl::BoolLit>) {
            return dsl::bool_lit(n.value);
          } else if constexpr (std::is_same_v<T, dsl::Not>) {
            return dsl::make_not(cond(*n.arg, b));
          } else if constexpr (std::is_same_v<T, dsl::And> || std::is_same_v<T, dsl::Or>) {
            // Short-circuit on the absorbing constant like the evaluator does.
            constexpr bool absorbing = std::is_same_v<T, dsl::Or>;
            std::vector<CondPtr> parts;
            for (const auto& a : n.args) {
              CondPtr p = cond(*a, b);
              bool v = false;
              if (dsl::is_constant(*p, &v) && v == absorbing) return dsl::bool_lit(absorbing);
              parts.push_back(std::move(p));
            }
            return absorbing ? dsl::make_or(std::move(parts)) : dsl::make_and(std::move(parts));
          } else {
            return atom(n, c.span, b);
          }
        },
        c.node);
  }

  PVal term(const dsl::Term& t, const Bindings* b) const {
    return std::visit(
        [&](const auto& n) -> PVal {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, dsl::NumberLit>) {
            return Value(n.value);
          } else if constexpr (std::is_same_v<T, dsl::StringLit>) {
            return Value(dsl::EntityName{n.value});
          } else if constexpr (std::is_same_v<T, dsl::Hole>) {
            return dsl::hole(n.name, n.lo, n.hi);
          } else if constexpr (std::is_same_v<T, dsl::QueryRef>) {
            if (b != nullptr) {
              auto it = b->find("q");
              if (it != b->end()) return it->second;
            }
            return Value(q_);
          } else if constexpr (std::is_same_v<T, dsl::EntityRef>) {
            if (b != nullptr) {
              auto it = b->find(n.name);
              if (it != b->end()) return it->second;
            }
            return Value(dsl::EntityName{n.name});
          } else {
            std::vector<PVal> args;
            bool concrete = true;
            for (const auto& a : n.args) {
              args.push_back(term(*a, b));
              concrete = concrete && std::holds_alternative<Value>(args.back());
            }
            if (concrete) {
              std::vector<Value> values;
              for (auto& a : args) values.push_back(std::get<Value>(std::move(a)));
              try {
                return ev_.call_function(n.name, values);
              } catch (const Error& e) {
                throw located(e, t.span);
              }
            }
            std::vector<TermPtr> terms;
            for (const auto& a : args) terms.push_back(to_term(a));
            return dsl::call(n.name, std::move(terms));
          }
        },
        t.node);
  }

 private:
  static Error located(const Error& e, const dsl::SourceSpan& span) {
    std::string msg = e.what();
    if (span.line > 0 && msg.rfind("at ", 0) != 0) {
      msg = "at " + std::to_string(span.line) + ":" + std::to_string(span.column) + ": " + msg;
    }
    return Error(e.code(), msg);
  }

  CondPtr atom(const dsl::Atom& a, const dsl::SourceSpan& span, const Bindings* b) const {
    std::vector<PVal> args;
    bool concrete = true;
    for (const auto& t : a.args) {
      args.push_back(term(*t, b));
      concrete = concrete && std::holds_alternative<Value>(args.back());
    }
    if (concrete) {
      std::vector<Value> values;
      for (auto& v : args) values.push_back(std::get<Value>(std::move(v)));
      try {
        return dsl::bool_lit(ev_.apply_atom(a.head, values));
      } catch (const Error& e) {
        throw located(e, span);
      }
    }
    if (const auto* pred = ev_.library().find_predicate(a.head)) {
      if (pred->params.size() != args.size()) {
        throw located(Error(ErrorCode::kArityMismatch, "'" + a.head + "' takes " +
                                                           std::to_string(pred->params.size()) + " argument(s)"),
                      span);
      }
      Bindings inner;
      for (std::size_t i = 0; i < args.size(); ++i) inner.emplace(pred->params[i].name, args[i]);
      NodePtr body = node(pred->body.root(), &inner);
      return guard_formula(*body, "true");
    }
    std::vector<TermPtr> terms;
    for (const auto& v : args) terms.push_back(to_term(v));
    return dsl::atom(a.head, std::move(terms));
  }

  const dsl::Evaluator& ev_;
  scene::Cell q_;
};

const scene::Scene& unit_scene() {
  static const scene::Scene s = [] {
    scene::Scene x;
    x.id = "unit";
    x.width = 1;
    x.height = 1;
    x.terrain = {"none"};
    return x;
  }();
  return s;
}

}  // namespace

Residual partial_eval(const dsl::Sketch& sketch, const Demonstration& demo, std::size_t query_index,
                      const library::ConceptLibrary& lib, const scene::PerceptionProvider& provider) {
  if (query_index >= demo.queries.size()) {
    throw Error(ErrorCode::kOutOfBounds, "demonstration '" + demo.id + "' has no query #" +
                                             std::to_string(query_index));
  }
  const auto& lq = demo.queries[query_index];
  if (!demo.scene->in_bounds(lq.cell)) throw Error(ErrorCode::kOutOfBounds, "query outside scene");
  dsl::Evaluator ev(*demo.scene, lib, provider);
  PartialEvaluator pe(ev, lq.cell);
  return Residual{dsl::Sketch{pe.node(*sketch.root, nullptr)}, lq.label};
}

CondPtr guard_formula(const dsl::Node& node, const std::string& label) {
  if (const auto* leaf = std::get_if<dsl::Leaf>(&node.node)) return dsl::bool_lit(leaf->label == label);
  const auto& br = std::get<dsl::Branch>(node.node);
  CondPtr then_guard = guard_formula(*br.then_branch, label);
  CondPtr else_guard = guard_formula(*br.else_branch, label);
  return dsl::make_or({dsl::make_and({br.cond, then_guard}), dsl::make_and({dsl::make_not(br.cond), else_guard})});
}

CondPtr guard_formula(const dsl::Sketch& sketch, const std::string& label) {
  return guard_formula(*sketch.root, label);
}

bool evaluate_residual_condition(const dsl::Cond& cond, const dsl::Assignment& assignment) {
  static const library::ConceptLibrary builtins;
  dsl::Evaluator ev(unit_scene(), builtins, dsl::default_perception());
  return ev.condition(cond, dsl::Frame{{0, 0}, &assignment, nullptr});
}

std::string evaluate_residual(const dsl::Sketch& residual, const dsl::Assignment& assignment) {
  static const library::ConceptLibrary builtins;
  dsl::Evaluator ev(unit_scene(), builtins, dsl::default_perception());
  return ev.node(*residual.root, dsl::Frame{{0, 0}, &assignment, nullptr});
}

}  // namespace prefprog::params
