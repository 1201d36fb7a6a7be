#include "prefprog/orchestrator/session.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <set>

#include "prefprog/digest.hpp"
#include "prefprog/dsl/syntax.hpp"
#include "prefprog/error.hpp"
#include "prefprog/io.hpp"
#include "prefprog/library/store.hpp"
#include "prefprog/params/formula.hpp"

namespace prefprog::orchestrator {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

LearningSession new_session(std::string id, dsl::LabelSet labels, library::ConceptLibrary lib) {
  LearningSession s;
  s.id = std::move(id);
  s.labels = std::move(labels);
  s.library = std::move(lib);
  return s;
}

std::string utc_timestamp() {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

// Per learn call: query counts per predicate, so ids are reproducible.
struct Interaction {
  std::map<std::string, int, std::less<>> asked;
  std::set<std::string, std::less<>> in_progress;
};

std::string stamp(const Learner& learner) {
  return learner.options.clock ? learner.options.clock() : utc_timestamp();
}

AuxMode mode_for(const Learner& learner, std::string_view name) {
  auto it = learner.options.aux_mode_overrides.find(name);
  return it == learner.options.aux_mode_overrides.end() ? learner.options.aux_mode : it->second;
}

std::string signature(const synthesis::PredicateMention& m) {
  std::string out = m.name + "(";
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    if (i) out += ", ";
    out += m.params[i].name;
  }
  return out + ")";
}

UserAnswer ask(const Learner& learner, Interaction& state, const synthesis::PredicateMention& m, QueryKind kind) {
  int& n = state.asked[m.name];
  if (n >= learner.options.max_queries) {
    throw Error(ErrorCode::kQueryCap, "query limit of " + std::to_string(learner.options.max_queries) +
                                          " reached while learning '" + m.name + "'");
  }
  ++n;
  UserQuery q;
  q.id = m.name + "-" + std::to_string(n);
  q.predicate = m.name;
  q.kind = kind;
  q.prompt = kind == QueryKind::kExplanation
                 ? "What does " + signature(m) + " mean?"
                 : "Label a location where " + signature(m) +
                       " holds (true) or not (false) and explain why, or answer done.";
  return learner.channel->ask(q);
}

dsl::TermPtr rename_term(const dsl::TermPtr& t, const std::map<std::string, std::string>& names) {
  if (auto* e = std::get_if<dsl::EntityRef>(&t->node)) {
    auto it = names.find(e->name);
    return it == names.end() ? t : dsl::entity(it->second);
  }
  if (auto* c = std::get_if<dsl::Call>(&t->node)) {
    std::vector<dsl::TermPtr> args;
    for (const auto& a : c->args) args.push_back(rename_term(a, names));
    return dsl::call(c->name, std::move(args));
  }
  return t;
}

dsl::CondPtr rename_cond(const dsl::CondPtr& c, const std::map<std::string, std::string>& names) {
  return std::visit(
      [&](const auto& n) -> dsl::CondPtr {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, dsl::Atom>) {
          std::vector<dsl::TermPtr> args;
          for (const auto& a : n.args) args.push_back(rename_term(a, names));
          return dsl::atom(n.head, std::move(args));
        } else if constexpr (std::is_same_v<T, dsl::Not>) {
          return dsl::negate(rename_cond(n.arg, names));
        } else if constexpr (std::is_same_v<T, dsl::And> || std::is_same_v<T, dsl::Or>) {
          std::vector<dsl::CondPtr> args;
          for (const auto& a : n.args) args.push_back(rename_cond(a, names));
          return std::is_same_v<T, dsl::And> ? dsl::conj(std::move(args)) : dsl::disj(std::move(args));
        } else {
          return c;
        }
      },
      c->node);
}

dsl::NodePtr rename_node(const dsl::NodePtr& node, const std::map<std::string, std::string>& names) {
  if (auto* b = std::get_if<dsl::Branch>(&node->node)) {
    return dsl::branch(rename_cond(b->cond, names), rename_node(b->then_branch, names),
                       rename_node(b->else_branch, names));
  }
  return node;
}

library::ConceptLibrary update_library(std::string_view explanation, const library::ConceptLibrary& lib,
                                       const Learner& learner, Interaction& state, int depth);

library::ConceptLibrary add_entities(std::string_view explanation, library::ConceptLibrary lib,
                                     const Learner& learner) {
  for (const auto& e : synthesis::extract_entities(explanation, lib, learner.provider)) {
    if (!lib.contains(e) || lib.has_entity(e)) lib = lib.add_entity(e);
  }
  return lib;
}

library::ConceptLibrary add_concept(library::ConceptLibrary lib, const std::string& name,
                                    std::vector<library::Param> params, const dsl::Sketch& body,
                                    std::vector<std::string> provenance, const Learner& learner) {
  for (const auto& ref : library::unknown_entity_refs(body, lib, params)) lib = lib.add_entity(ref);
  return lib.add_predicate(library::PredicateConcept{
      name, std::move(params), dsl::Program::from_sketch(body), std::move(provenance), 0, stamp(learner), {}});
}

LearningSession learn_step(const LearningSession& session, const params::Demonstration& demo,
                           const Learner& learner, Interaction& state, int depth) {
  params::validate(demo, session.labels);
  LearningSession next = session;
  next.library = update_library(demo.explanation, session.library, learner, state, depth);
  next.sketch = synthesis::synthesize_sketch(learner.options.mode, session.sketch, demo.explanation, next.library,
                                             session.labels, learner.provider);
  next.demos.push_back(demo);
  auto result = params::param_synth(*next.sketch, next.demos, next.library, next.labels, learner.perception,
                                    learner.options.solver);
  next.program = std::move(result.program);
  next.solve = std::move(result.solve);
  return next;
}

// Solves a parameterized definition against demonstrations of the predicate.
// Each demonstration binds the definition's entity parameters, in order, to
// the entities its explanation names.
dsl::Sketch solve_definition(const synthesis::PredicateDefinition& def, const dsl::Sketch& sketch,
                             const std::vector<params::Demonstration>& demos, const library::ConceptLibrary& lib,
                             const Learner& learner, const std::string& name) {
  auto labels = dsl::LabelSet::boolean();
  std::vector<std::string> entity_params;
  for (const auto& p : def.params) {
    if (p.kind == library::Kind::kEntity) entity_params.push_back(p.name);
  }
  params::WeightedFormula wf;
  wf.holes = dsl::hole_bounds(sketch);
  for (const auto& d : demos) {
    auto named = synthesis::extract_entities(d.explanation, lib, learner.provider);
    if (named.size() < entity_params.size()) {
      throw Error(ErrorCode::kSchema, "demonstration '" + d.id + "' for '" + name + "' names " +
                                          std::to_string(named.size()) + " entities, " +
                                          std::to_string(entity_params.size()) + " needed");
    }
    std::map<std::string, std::string> binding;
    for (std::size_t i = 0; i < entity_params.size(); ++i) binding[entity_params[i]] = named[i];
    dsl::Sketch inst{rename_node(sketch.root, binding)};
    auto part = params::build_constraint(inst, {d}, lib, labels, learner.perception);
    for (auto& c : part.clauses) wf.clauses.push_back(std::move(c));
  }
  std::stable_sort(wf.clauses.begin(), wf.clauses.end(),
                   [](const auto& a, const auto& b) { return a.origin < b.origin; });
  auto solved = params::solve_maxsmt(wf, learner.options.solver);
  return dsl::substitute(sketch, solved.assignment);
}

library::ConceptLibrary learn_from_demonstrations(const synthesis::PredicateMention& mention,
                                                  const library::ConceptLibrary& lib, const Learner& learner,
                                                  Interaction& state, int depth) {
  auto def = synthesis::define_predicate(mention.name, "", lib, learner.provider);
  bool parameterized = def && def->sketch;
  std::vector<library::Param> params = parameterized ? def->params : mention.params;
  if (!parameterized) {
    for (const auto& p : params) {
      if (p.kind == library::Kind::kEntity) {
        throw Error(ErrorCode::kUnresolvedPredicate,
                    "'" + mention.name + "' takes entity arguments and has no parameterized definition");
      }
    }
  }

  // Fresh inner session over {true, false} sharing the growing library.
  LearningSession inner = new_session(mention.name, dsl::LabelSet::boolean(), lib);
  for (;;) {
    auto answer = ask(learner, state, mention, QueryKind::kDemonstration);
    if (answer.kind == UserAnswer::Kind::kDone) break;
    if (answer.kind != UserAnswer::Kind::kDemonstration || !answer.demonstration) {
      throw Error(ErrorCode::kChannel, "expected a demonstration for '" + mention.name + "'");
    }
    const auto& d = *answer.demonstration;
    if (parameterized) {
      params::validate(d, inner.labels);
      inner.library = update_library(d.explanation, inner.library, learner, state, depth);
      inner.demos.push_back(d);
    } else {
      inner = learn_step(inner, d, learner, state, depth);
    }
  }
  if (inner.demos.empty()) {
    throw Error(ErrorCode::kUnresolvedPredicate, "no demonstrations given for '" + mention.name + "'");
  }

  std::vector<std::string> provenance;
  for (const auto& d : inner.demos) provenance.push_back(d.id);
  std::sort(provenance.begin(), provenance.end());
  dsl::Sketch body = parameterized
                         ? solve_definition(*def, *def->sketch, inner.demos, inner.library, learner, mention.name)
                         : inner.program->sketch();
  return add_concept(inner.library, mention.name, params, body, std::move(provenance), learner);
}

library::ConceptLibrary learn_aux(const synthesis::PredicateMention& mention, const library::ConceptLibrary& lib,
                                  const Learner& learner, AuxMode mode, Interaction& state, int depth) {
  if (!learner.channel) {
    throw Error(ErrorCode::kUnresolvedPredicate, "'" + mention.name + "' is not in the library and no user channel is available");
  }
  if (depth > learner.options.max_depth) {
    throw Error(ErrorCode::kRecursionDepth, "auxiliary concept nesting deeper than " +
                                                std::to_string(learner.options.max_depth) + " at '" +
                                                mention.name + "'");
  }
  state.in_progress.insert(mention.name);
  if (mode == AuxMode::kExplanationOnly) {
    auto answer = ask(learner, state, mention, QueryKind::kExplanation);
    if (answer.kind == UserAnswer::Kind::kDone) {
      throw Error(ErrorCode::kUnresolvedPredicate, "user gave no explanation for '" + mention.name + "'");
    }
    auto def = synthesis::define_predicate(mention.name, answer.explanation, lib, learner.provider);
    if (def && def->body) {
      auto grown = add_entities(answer.explanation, lib, learner);
      return add_concept(std::move(grown), mention.name, def->params, *def->body, {}, learner);
    }
    // No usable rule for this predicate: ask for demonstrations instead.
  }
  return learn_from_demonstrations(mention, lib, learner, state, depth);
}

library::ConceptLibrary update_library(std::string_view explanation, const library::ConceptLibrary& lib,
                                       const Learner& learner, Interaction& state, int depth) {
  auto next = add_entities(explanation, lib, learner);
  for (const auto& mention : synthesis::extract_predicates(explanation, next, learner.provider)) {
    // A predicate mentioned while it is itself being taught is left to the
    // teaching loop rather than asked about again.
    if (next.contains(mention.name) || state.in_progress.count(mention.name)) continue;
    next = learn_aux(mention, next, learner, mode_for(learner, mention.name), state, depth + 1);
  }
  return next;
}

}  // namespace

LearningSession learn(const LearningSession& session, const params::Demonstration& demo, const Learner& learner) {
  Interaction state;
  return learn_step(session, demo, learner, state, 0);
}

LearningSession learn_all(LearningSession session, const std::vector<params::Demonstration>& demos,
                          const Learner& learner) {
  for (const auto& d : demos) session = learn(session, d, learner);
  return session;
}

library::ConceptLibrary update_concept_library(std::string_view explanation, const library::ConceptLibrary& lib,
                                               const Learner& learner) {
  Interaction state;
  return update_library(explanation, lib, learner, state, 0);
}

library::ConceptLibrary learn_predicate(const synthesis::PredicateMention& mention,
                                        const library::ConceptLibrary& lib, const Learner& learner,
                                        AuxMode mode) {
  Interaction state;
  return learn_aux(mention, lib, learner, mode, state, 1);
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

constexpr const char* kDemoFormat = "%03zu.json";

ordered_json solve_to_json(const params::SolveResult& r) {
  ordered_json assignment = ordered_json::object();
  for (const auto& [k, v] : r.assignment) assignment[k] = v;
  return {{"assignment", assignment},
          {"satisfied_weight", r.satisfied_weight},
          {"total_weight", r.total_weight},
          {"unsat_origins", r.unsat_origins},
          {"optimal", r.optimal}};
}

params::SolveResult solve_from_json(const json& doc) {
  params::SolveResult r;
  for (const auto& [k, v] : doc.at("assignment").items()) r.assignment[k] = v.get<double>();
  r.satisfied_weight = doc.at("satisfied_weight").get<int>();
  r.total_weight = doc.at("total_weight").get<int>();
  r.unsat_origins = doc.at("unsat_origins").get<std::vector<std::string>>();
  r.optimal = doc.at("optimal").get<bool>();
  return r;
}

ordered_json write_artifact(const fs::path& dir, const std::string& rel, const std::string& text) {
  io::write_text(dir / rel, text);
  return {{"file", rel}, {"sha256", sha256_hex(text)}};
}

std::string read_artifact(const fs::path& dir, const json& entry) {
  auto rel = entry.at("file").get<std::string>();
  auto path = dir / rel;
  if (!fs::exists(path)) throw Error(ErrorCode::kDigestMismatch, "session artifact missing: " + rel);
  auto text = io::read_text(path);
  if (sha256_hex(text) != entry.at("sha256").get<std::string>()) {
    throw Error(ErrorCode::kDigestMismatch, "session artifact altered: " + rel);
  }
  return text;
}

}  // namespace

void save_session(const LearningSession& session, const fs::path& dir) {
  fs::create_directories(dir);
  fs::remove_all(dir / "demos");
  fs::remove(dir / "sketch.pref");
  fs::remove(dir / "program.pref");
  fs::remove_all(dir / "library");

  ordered_json meta;
  meta["format_version"] = kSessionFormatVersion;
  meta["id"] = session.id;
  meta["labels"] = session.labels.labels();
  ordered_json demos = ordered_json::array();
  for (std::size_t i = 0; i < session.demos.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, kDemoFormat, i);
    auto entry = write_artifact(dir, std::string("demos/") + name, params::demo_to_json(session.demos[i]).dump(2) + "\n");
    entry["id"] = session.demos[i].id;
    demos.push_back(entry);
  }
  meta["demos"] = demos;
  meta["sketch"] = session.sketch ? write_artifact(dir, "sketch.pref", dsl::print_program(*session.sketch) + "\n")
                                  : ordered_json(nullptr);
  meta["program"] = session.program
                        ? write_artifact(dir, "program.pref", dsl::print_program(session.program->sketch()) + "\n")
                        : ordered_json(nullptr);
  ordered_json pending = ordered_json::array();
  for (const auto& q : session.pending_queries) pending.push_back(ordered_json(query_to_json(q)));
  meta["pending_queries"] = pending;
  meta["solve"] = session.solve ? solve_to_json(*session.solve) : ordered_json(nullptr);
  library::save_library(session.library, dir / "library");
  io::write_json(dir / "session.json", meta);
}

LearningSession load_session(const fs::path& dir) {
  auto meta = io::read_json(dir / "session.json");
  if (meta.value("format_version", 0) != kSessionFormatVersion) {
    throw Error(ErrorCode::kVersionFormat, "unsupported session format in " + dir.string());
  }
  try {
    LearningSession s;
    s.id = meta.at("id").get<std::string>();
    s.labels = dsl::LabelSet(meta.at("labels").get<std::vector<std::string>>());
    for (const auto& entry : meta.at("demos")) {
      s.demos.push_back(params::demo_from_json(json::parse(read_artifact(dir, entry))));
    }
    if (!meta.at("sketch").is_null()) s.sketch = dsl::parse_program(read_artifact(dir, meta["sketch"]), s.labels);
    if (!meta.at("program").is_null()) {
      s.program = dsl::Program::from_sketch(dsl::parse_program(read_artifact(dir, meta["program"]), s.labels));
    }
    for (const auto& q : meta.at("pending_queries")) s.pending_queries.push_back(query_from_json(q));
    if (!meta.at("solve").is_null()) s.solve = solve_from_json(meta["solve"]);
    s.library = library::load_library(dir / "library");
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchema, "malformed session.json: " + std::string(e.what()));
  }
}

}  // namespace prefprog::orchestrator
