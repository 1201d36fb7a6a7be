#include "prefprog/dsl/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "prefprog/dsl/syntax.hpp"
#include "prefprog/error.hpp"

namespace prefprog::dsl {

namespace {

constexpr double kEqualityTolerance = 1e-9;

double as_number(const Value& v, std::string_view fn) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  throw Error(ErrorCode::kTypeError, "'" + std::string(fn) + "' expects a number, got " + describe(v));
}

const std::string& as_entity(const Value& v, std::string_view fn) {
  if (const auto* e = std::get_if<EntityName>(&v)) return e->name;
  throw Error(ErrorCode::kTypeError, "'" + std::string(fn) + "' expects an entity, got " + describe(v));
}

scene::Cell as_cell(const Value& v, std::string_view fn) {
  if (const auto* c = std::get_if<scene::Cell>(&v)) return *c;
  throw Error(ErrorCode::kTypeError, "'" + std::string(fn) + "' expects a query, got " + describe(v));
}

void expect_arity(std::string_view fn, const std::vector<Value>& args, std::size_t n) {
  if (args.size() != n) {
    throw Error(ErrorCode::kArityMismatch, "'" + std::string(fn) + "' takes " + std::to_string(n) +
                                               " argument(s), got " + std::to_string(args.size()));
  }
}

std::string with_span(const SourceSpan& span, const std::string& message) {
  if (span.line <= 0 || message.rfind("at ", 0) == 0) return message;
  return "at " + std::to_string(span.line) + ":" + std::to_string(span.column) + ": " + message;
}

class ScriptedDefault : public scene::ScriptedPerception {};

}  // namespace

std::string describe(const Value& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, double>) return "number " + format_number(x);
        if constexpr (std::is_same_v<T, bool>) return x ? "true" : "false";
        if constexpr (std::is_same_v<T, EntityName>) return "entity " + x.name;
        if constexpr (std::is_same_v<T, scene::Cell>) {
          return "cell (" + std::to_string(x.row) + "," + std::to_string(x.col) + ")";
        }
      },
      v);
}

const scene::PerceptionProvider& default_perception() {
  static const ScriptedDefault provider;
  return provider;
}

const scene::Mask& FeatureCache::mask(const std::string& name) {
  std::lock_guard lock(mutex_);
  auto& slot = masks_[name];
  if (!slot) slot = std::make_unique<scene::Mask>(provider_.ground(scene_, name));
  return *slot;
}

const std::vector<double>& FeatureCache::distance_field(const std::string& name) {
  const scene::Mask& m = mask(name);
  std::lock_guard lock(mutex_);
  auto& slot = fields_[name];
  if (slot) return *slot;
  if (m.empty()) {
    throw Error(ErrorCode::kEmptyMask, "no '" + name + "' grounded in scene '" + scene_.id + "'");
  }
  auto cells = m.cells();
  auto field = std::make_unique<std::vector<double>>(scene_.cell_count());
  for (int r = 0; r < scene_.height; ++r) {
    for (int c = 0; c < scene_.width; ++c) {
      long best = std::numeric_limits<long>::max();
      for (const auto& mc : cells) {
        long dr = mc.row - r;
        long dc = mc.col - c;
        best = std::min(best, dr * dr + dc * dc);
      }
      (*field)[scene_.index({r, c})] = std::sqrt(static_cast<double>(best)) * scene_.cell_size;
    }
  }
  slot = std::move(field);
  return *slot;
}

std::string Evaluator::run(const Sketch& sketch, scene::Cell q, const Assignment* holes) const {
  if (!scene_.in_bounds(q)) {
    throw Error(ErrorCode::kOutOfBounds, "query (" + std::to_string(q.row) + "," + std::to_string(q.col) +
                                             ") outside scene '" + scene_.id + "'");
  }
  return node(*sketch.root, Frame{q, holes, nullptr});
}

std::string Evaluator::node(const Node& n, const Frame& frame) const {
  const Node* cur = &n;
  while (const auto* b = std::get_if<Branch>(&cur->node)) {
    cur = condition(*b->cond, frame) ? b->then_branch.get() : b->else_branch.get();
  }
  return std::get<Leaf>(cur->node).label;
}

bool Evaluator::condition(const Cond& cond, const Frame& frame) const {
  return std::visit(
      [&](const auto& n) -> bool {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, BoolLit>) {
          return n.value;
        } else if constexpr (std::is_same_v<T, Not>) {
          return !condition(*n.arg, frame);
        } else if constexpr (std::is_same_v<T, And>) {
          return std::all_of(n.args.begin(), n.args.end(), [&](const CondPtr& c) { return condition(*c, frame); });
        } else if constexpr (std::is_same_v<T, Or>) {
          return std::any_of(n.args.begin(), n.args.end(), [&](const CondPtr& c) { return condition(*c, frame); });
        } else {
          std::vector<Value> args;
          args.reserve(n.args.size());
          for (const auto& a : n.args) args.push_back(term(*a, frame));
          try {
            return apply_atom(n.head, args);
          } catch (const Error& e) {
            throw Error(e.code(), with_span(cond.span, e.what()));
          }
        }
      },
      cond.node);
}

Value Evaluator::term(const Term& t, const Frame& frame) const {
  return std::visit(
      [&](const auto& n) -> Value {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, NumberLit>) {
          return n.value;
        } else if constexpr (std::is_same_v<T, StringLit>) {
          return EntityName{n.value};
        } else if constexpr (std::is_same_v<T, Hole>) {
          if (frame.holes != nullptr) {
            auto it = frame.holes->find(n.name);
            if (it != frame.holes->end()) return it->second;
          }
          throw Error(ErrorCode::kUnboundHole, with_span(t.span, "hole ??" + n.name + " has no value"));
        } else if constexpr (std::is_same_v<T, QueryRef>) {
          if (frame.bindings != nullptr) {
            auto it = frame.bindings->find("q");
            if (it != frame.bindings->end()) return it->second;
          }
          return frame.q;
        } else if constexpr (std::is_same_v<T, EntityRef>) {
          if (frame.bindings != nullptr) {
            auto it = frame.bindings->find(n.name);
            if (it != frame.bindings->end()) return it->second;
          }
          return EntityName{n.name};
        } else {
          std::vector<Value> args;
          args.reserve(n.args.size());
          for (const auto& a : n.args) args.push_back(term(*a, frame));
          try {
            return call_function(n.name, args);
          } catch (const Error& e) {
            throw Error(e.code(), with_span(t.span, e.what()));
          }
        }
      },
      t.node);
}

Value Evaluator::call_function(std::string_view name, const std::vector<Value>& args) const {
  if (is_comparator(name)) {
    expect_arity(name, args, 2);
    double a = as_number(args[0], name);
    double b = as_number(args[1], name);
    if (name == "<") return a < b;
    if (name == "<=") return a <= b;
    if (name == "=") return std::abs(a - b) <= kEqualityTolerance;
    if (name == ">=") return a >= b;
    return a > b;
  }
  if (name == "+" || name == "-" || name == "*" || name == "/" || name == "min" || name == "max") {
    expect_arity(name, args, 2);
    double a = as_number(args[0], name);
    double b = as_number(args[1], name);
    if (name == "+") return a + b;
    if (name == "-") return a - b;
    if (name == "*") return a * b;
    if (name == "/") return a / b;
    if (name == "min") return std::min(a, b);
    return std::max(a, b);
  }
  if (name == "abs") {
    expect_arity(name, args, 1);
    return std::abs(as_number(args[0], name));
  }
  if (name == "project_ground") {
    expect_arity(name, args, 1);
    return as_cell(args[0], name);
  }
  if (name == "depth_at") {
    expect_arity(name, args, 1);
    return scene::depth_at(scene_, as_cell(args[0], name));
  }
  if (name == "dist_to" || name == "is_on" || name == "in_region") {
    expect_arity(name, args, 2);
    scene::Cell q = as_cell(args[0], name);
    const std::string& e = as_entity(args[1], name);
    if (!scene_.in_bounds(q)) throw Error(ErrorCode::kOutOfBounds, "query outside scene");
    if (name == "is_on") return scene::is_on(scene_, q, e);
    if (cache_ == nullptr) {
      if (name == "dist_to") return scene::dist_to(scene_, q, e, provider_);
      return scene::in_region(scene_, q, e, provider_);
    }
    if (name == "dist_to") return cache_->distance_field(e)[scene_.index(q)];
    return cache_->mask(e).test(q);
  }
  if (lib_.find_predicate(name) != nullptr) {
    return call_predicate(lib_.lookup_predicate(name), args);
  }
  throw Error(ErrorCode::kUnresolvedName, "unknown function '" + std::string(name) + "'");
}

bool Evaluator::call_predicate(const library::PredicateConcept& pred, const std::vector<Value>& args) const {
  if (args.size() != pred.params.size()) {
    throw Error(ErrorCode::kArityMismatch, "'" + pred.name + "' takes " + std::to_string(pred.params.size()) +
                                               " argument(s), got " + std::to_string(args.size()));
  }
  std::map<std::string, Value> bindings;
  scene::Cell q{};
  for (std::size_t i = 0; i < args.size(); ++i) {
    const auto& p = pred.params[i];
    switch (p.kind) {
      case library::Kind::kNumber: as_number(args[i], pred.name); break;
      case library::Kind::kEntity: as_entity(args[i], pred.name); break;
      case library::Kind::kQuery: q = as_cell(args[i], pred.name); break;
      case library::Kind::kBool: break;
    }
    bindings.emplace(p.name, args[i]);
  }
  return node(pred.body.root(), Frame{q, nullptr, &bindings}) == "true";
}

bool Evaluator::apply_atom(std::string_view head, const std::vector<Value>& args) const {
  if (const auto* f = lib_.find_function(head)) {
    if (f->result != library::Kind::kBool) {
      throw Error(ErrorCode::kTypeError, "condition '" + std::string(head) + "' is not boolean-valued");
    }
    return std::get<bool>(call_function(head, args));
  }
  if (const auto* p = lib_.find_predicate(head)) return call_predicate(*p, args);
  throw Error(ErrorCode::kUnresolvedName, "unknown predicate '" + std::string(head) + "'");
}

std::string evaluate(const Program& program, const scene::Scene& scene, scene::Cell q,
                     const library::ConceptLibrary& lib, const scene::PerceptionProvider& provider) {
  return Evaluator(scene, lib, provider).run(program.sketch(), q);
}

std::string evaluate_with_holes(const Sketch& sketch, const Assignment& holes, const scene::Scene& scene,
                                scene::Cell q, const library::ConceptLibrary& lib,
                                const scene::PerceptionProvider& provider) {
  return Evaluator(scene, lib, provider).run(sketch, q, &holes);
}

scene::PreferenceMask evaluate_mask(const Program& program, const scene::Scene& scene,
                                    const library::ConceptLibrary& lib,
                                    const scene::PerceptionProvider& provider, const MaskOptions& options) {
  std::unique_ptr<FeatureCache> cache;
  if (options.use_cache) cache = std::make_unique<FeatureCache>(scene, provider);
  Evaluator ev(scene, lib, provider, cache.get());

  scene::PreferenceMask out{scene.width, scene.height, std::vector<std::string>(scene.cell_count())};
  auto rows = [&](int begin, int end) {
    for (int r = begin; r < end; ++r) {
      for (int c = 0; c < scene.width; ++c) out.labels[scene.index({r, c})] = ev.run(program.sketch(), {r, c});
    }
  };

  int threads = std::clamp(options.threads, 1, std::max(1, scene.height));
  if (threads == 1) {
    rows(0, scene.height);
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
  int chunk = (scene.height + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        rows(t * chunk, std::min(scene.height, (t + 1) * chunk));
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  // Report the error from the lowest row band so failures are deterministic.
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace prefprog::dsl
