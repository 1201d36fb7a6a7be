#include "prefprog/synthesis/synthesis.hpp"

#include <algorithm>
#include <charconv>
#include <random>
#include <set>

#include "prefprog/dsl/syntax.hpp"
#include "prefprog/error.hpp"

namespace prefprog::synthesis {

using nlohmann::json;

namespace {

bool is_number(std::string_view s) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && ptr == s.data() + s.size();
}

dsl::TermPtr arg_term(const std::string& a) {
  if (a == "q") return dsl::query();
  if (is_number(a)) return dsl::number(std::stod(a));
  return dsl::entity(a);
}

std::string require_string(const json& doc, const char* key, const std::string& what) {
  if (!doc.is_object() || !doc.contains(key) || !doc[key].is_string()) {
    throw Error(ErrorCode::kProviderResponse, what + " reply lacks string field '" + key + "'");
  }
  return doc[key].get<std::string>();
}

std::vector<library::Param> params_from_json(const json& doc) {
  std::vector<library::Param> out;
  for (const auto& p : doc) {
    out.push_back({p.at("name").get<std::string>(), library::kind_from_name(p.at("kind").get<std::string>())});
  }
  return out;
}

json params_to_json(const std::vector<library::Param>& params) {
  json out = json::array();
  for (const auto& p : params) out.push_back({{"name", p.name}, {"kind", library::kind_name(p.kind)}});
  return out;
}

// Calls the provider and converts malformed records into kProviderResponse.
template <typename F>
auto parse_reply(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kProviderResponse, what + " reply is malformed: " + e.what());
  } catch (const SyntaxError& e) {
    throw Error(ErrorCode::kProviderResponse, what + " reply contains unparseable code: " + e.what());
  }
}

Expansions expansions_from(const json& reply) {
  Expansions out;
  if (reply.contains("expansions")) {
    for (const auto& [k, v] : reply["expansions"].items()) out[k] = v.get<std::string>();
  }
  return out;
}

std::string checked_label(const json& reply, const dsl::LabelSet& labels) {
  if (!reply.contains("label") || !reply["label"].is_string()) {
    throw Error(ErrorCode::kUnknownLabel, "explanation does not state a preference");
  }
  auto label = reply["label"].get<std::string>();
  if (!labels.contains(label)) throw Error(ErrorCode::kUnknownLabel, "label '" + label + "' is not a preference");
  return label;
}

void check_literals(const CnfFormula& phi, const library::ConceptLibrary& lib) {
  for (const auto& clause : phi.clauses) {
    for (const auto& lit : clause) {
      if (!lib.contains(lit.predicate)) {
        throw Error(ErrorCode::kUnresolvedPredicate,
                    "predicate '" + lit.predicate + "' is not in the concept library");
      }
    }
  }
  library::check_condition(*cnf_condition(phi), lib);
}

// Propositional view of a sketch for the contract check.
class AtomTable {
 public:
  explicit AtomTable(const library::ConceptLibrary& lib) : lib_(lib) {}

  void collect(const dsl::Cond& c) {
    std::visit(
        [&](const auto& n) {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, dsl::Atom>) {
            std::string key = dsl::print_condition(c);
            if (index_.count(key)) return;
            index_[key] = static_cast<int>(keys_.size());
            keys_.push_back(key);
            const auto* sig = lib_.find_function(n.head);
            if (sig && sig->partitions_first_arg && !n.args.empty()) {
              groups_[n.head + " " + dsl::print_term(*n.args[0])].push_back(index_[key]);
            }
          } else if constexpr (std::is_same_v<T, dsl::Not>) {
            collect(*n.arg);
          } else if constexpr (std::is_same_v<T, dsl::And> || std::is_same_v<T, dsl::Or>) {
            for (const auto& a : n.args) collect(*a);
          }
        },
        c.node);
  }
  void collect(const dsl::Node& n) {
    if (const auto* b = std::get_if<dsl::Branch>(&n.node)) {
      collect(*b->cond);
      collect(*b->then_branch);
      collect(*b->else_branch);
    }
  }

  std::size_t size() const { return keys_.size(); }
  const std::string& key(std::size_t i) const { return keys_[i]; }

  bool consistent(const std::vector<bool>& v) const {
    for (const auto& [g, members] : groups_) {
      int on = 0;
      for (int m : members) on += v[static_cast<std::size_t>(m)];
      if (on > 1) return false;
    }
    return true;
  }
  // Keeps at most one true atom per exclusive group.
  void repair(std::vector<bool>& v, std::mt19937_64& rng) const {
    for (const auto& [g, members] : groups_) {
      std::vector<int> on;
      for (int m : members) {
        if (v[static_cast<std::size_t>(m)]) on.push_back(m);
      }
      if (on.size() <= 1) continue;
      int keep = on[std::uniform_int_distribution<std::size_t>(0, on.size() - 1)(rng)];
      for (int m : on) v[static_cast<std::size_t>(m)] = m == keep;
    }
  }

  bool eval(const dsl::Cond& c, const std::vector<bool>& v) const {
    return std::visit(
        [&](const auto& n) -> bool {
          using T = std::decay_t<decltype(n)>;
          if constexpr (std::is_same_v<T, dsl::BoolLit>) {
            return n.value;
          } else if constexpr (std::is_same_v<T, dsl::Atom>) {
            return v[static_cast<std::size_t>(index_.at(dsl::print_condition(c)))];
          } else if constexpr (std::is_same_v<T, dsl::Not>) {
            return !eval(*n.arg, v);
          } else if constexpr (std::is_same_v<T, dsl::And>) {
            return std::all_of(n.args.begin(), n.args.end(), [&](const auto& a) { return eval(*a, v); });
          } else {
            return std::any_of(n.args.begin(), n.args.end(), [&](const auto& a) { return eval(*a, v); });
          }
        },
        c.node);
  }
  const std::string& eval(const dsl::Node& n, const std::vector<bool>& v) const {
    if (const auto* l = std::get_if<dsl::Leaf>(&n.node)) return l->label;
    const auto& b = std::get<dsl::Branch>(n.node);
    return eval(*b.cond, v) ? eval(*b.then_branch, v) : eval(*b.else_branch, v);
  }

  // Sets atoms so that top-level literals of `c` hold.
  void force(const dsl::Cond& c, std::vector<bool>& v) const {
    if (const auto* a = std::get_if<dsl::And>(&c.node)) {
      for (const auto& x : a->args) force(*x, v);
    } else if (std::holds_alternative<dsl::Atom>(c.node)) {
      v[static_cast<std::size_t>(index_.at(dsl::print_condition(c)))] = true;
    } else if (const auto* n = std::get_if<dsl::Not>(&c.node)) {
      if (std::holds_alternative<dsl::Atom>(n->arg->node)) {
        v[static_cast<std::size_t>(index_.at(dsl::print_condition(*n->arg)))] = false;
      }
    }
  }

 private:
  const library::ConceptLibrary& lib_;
  std::map<std::string, int> index_;
  std::vector<std::string> keys_;
  std::map<std::string, std::vector<int>> groups_;
};

// Flattens a decision chain into (label, guard) rules plus the final leaf.
std::pair<json, std::string> chain_rules(const dsl::Sketch& s) {
  json rules = json::array();
  const dsl::Node* n = s.root.get();
  while (const auto* b = std::get_if<dsl::Branch>(&n->node)) {
    const auto* leaf = std::get_if<dsl::Leaf>(&b->then_branch->node);
    if (!leaf) throw Error(ErrorCode::kContractViolation, "sketch is not a decision chain");
    rules.push_back({{"label", leaf->label}, {"condition", dsl::print_condition(*b->cond)}});
    n = b->else_branch.get();
  }
  return {rules, std::get<dsl::Leaf>(n->node).label};
}

dsl::Sketch finish(const dsl::Sketch& sketch, const CnfFormula& phi, const Expansions& expansions,
                   const std::string& label, const dsl::LabelSet& labels, const library::ConceptLibrary& lib) {
  library::check_sketch(sketch, lib, labels);
  auto expanded = cnf_condition(phi, expansions);
  library::check_condition(*expanded, lib);
  check_sketch_contract(sketch, *expanded, label, lib);
  return sketch;
}

}  // namespace

dsl::CondPtr literal_atom(const Literal& literal) {
  std::vector<dsl::TermPtr> args;
  for (const auto& a : literal.args) args.push_back(arg_term(a));
  return dsl::atom(literal.predicate, std::move(args));
}

dsl::CondPtr cnf_condition(const CnfFormula& phi, const Expansions& expansions) {
  std::vector<dsl::CondPtr> conj;
  for (const auto& clause : phi.clauses) {
    std::vector<dsl::CondPtr> disj;
    for (const auto& lit : clause) {
      auto a = literal_atom(lit);
      if (auto it = expansions.find(dsl::print_condition(*a)); it != expansions.end()) {
        a = dsl::parse_condition(it->second);
      }
      disj.push_back(lit.negated ? dsl::negate(a) : a);
    }
    conj.push_back(disj.size() == 1 ? disj.front() : dsl::disj(std::move(disj)));
  }
  if (conj.empty()) return dsl::bool_lit(true);
  return conj.size() == 1 ? conj.front() : dsl::conj(std::move(conj));
}

std::string print_cnf(const CnfFormula& phi) {
  auto lit_text = [](const Literal& l) {
    std::string out = l.negated ? "!" : "";
    out += l.predicate + "(";
    for (std::size_t i = 0; i < l.args.size(); ++i) out += (i ? ", " : "") + l.args[i];
    return out + ")";
  };
  std::string out;
  for (std::size_t i = 0; i < phi.clauses.size(); ++i) {
    if (i) out += " & ";
    const auto& c = phi.clauses[i];
    if (c.size() == 1) {
      out += lit_text(c[0]);
      continue;
    }
    out += "(";
    for (std::size_t j = 0; j < c.size(); ++j) out += (j ? " | " : "") + lit_text(c[j]);
    out += ")";
  }
  return out.empty() ? "true" : out;
}

json cnf_to_json(const CnfFormula& phi) {
  json clauses = json::array();
  for (const auto& c : phi.clauses) {
    json lits = json::array();
    for (const auto& l : c) lits.push_back({{"predicate", l.predicate}, {"args", l.args}, {"negated", l.negated}});
    clauses.push_back(lits);
  }
  return clauses;
}

CnfFormula cnf_from_json(const json& doc) {
  CnfFormula phi;
  for (const auto& c : doc) {
    Clause clause;
    for (const auto& l : c) {
      clause.push_back({l.at("predicate").get<std::string>(), l.at("args").get<std::vector<std::string>>(),
                        l.value("negated", false)});
    }
    if (clause.empty()) throw Error(ErrorCode::kProviderResponse, "empty clause in CNF");
    phi.clauses.push_back(std::move(clause));
  }
  return phi;
}

json library_context(const library::ConceptLibrary& lib) {
  json preds = json::array();
  for (const auto& name : lib.predicate_names()) {
    preds.push_back({{"name", name}, {"params", params_to_json(lib.lookup_predicate(name).params)}});
  }
  return {{"entities", lib.entities()}, {"predicates", preds}, {"functions", lib.function_names()}};
}

std::vector<std::string> extract_entities(std::string_view explanation, const library::ConceptLibrary& lib,
                                          const LmProvider& provider) {
  auto reply = provider.complete("extract_entities",
                                 {{"explanation", explanation}, {"library", library_context(lib)}});
  return parse_reply("extract_entities", [&] {
    std::vector<std::string> out;
    for (const auto& e : reply.at("entities")) {
      auto name = library::normalize_name(e.get<std::string>());
      if (!name.empty() && std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
    }
    return out;
  });
}

std::vector<PredicateMention> extract_predicates(std::string_view explanation, const library::ConceptLibrary& lib,
                                                 const LmProvider& provider) {
  auto reply = provider.complete("extract_predicates",
                                 {{"explanation", explanation}, {"library", library_context(lib)}});
  auto found = parse_reply("extract_predicates", [&] {
    std::vector<PredicateMention> out;
    for (const auto& p : reply.at("predicates")) {
      PredicateMention m{library::normalize_name(p.at("name").get<std::string>()), params_from_json(p.at("params"))};
      bool seen = std::any_of(out.begin(), out.end(), [&](const auto& x) { return x.name == m.name; });
      if (!m.name.empty() && !seen) out.push_back(std::move(m));
    }
    return out;
  });
  for (const auto& m : found) {
    std::size_t arity = 0;
    if (const auto* p = lib.find_predicate(m.name)) {
      arity = p->params.size();
    } else if (const auto* f = lib.find_function(m.name)) {
      arity = f->params.size();
    } else {
      continue;
    }
    if (arity != m.params.size()) {
      throw Error(ErrorCode::kArityMismatch, "provider guessed " + std::to_string(m.params.size()) +
                                                 " parameters for '" + m.name + "', library has " +
                                                 std::to_string(arity));
    }
  }
  return found;
}

NlCnf nl_to_cnf(std::string_view explanation, const library::ConceptLibrary& lib, const dsl::LabelSet& labels,
                const LmProvider& provider) {
  auto reply = provider.complete("nl_to_cnf", {{"explanation", explanation},
                                               {"labels", labels.labels()},
                                               {"library", library_context(lib)}});
  NlCnf out;
  out.phi = parse_reply("nl_to_cnf", [&] { return cnf_from_json(reply.at("clauses")); });
  out.label = checked_label(reply, labels);
  check_literals(out.phi, lib);
  return out;
}

void check_sketch_contract(const dsl::Sketch& sketch, const dsl::Cond& phi, const std::string& label,
                           const library::ConceptLibrary& lib, int samples, std::uint64_t seed) {
  AtomTable table(lib);
  table.collect(phi);
  table.collect(*sketch.root);
  auto violation = [&](const std::vector<bool>& v, const std::string& got) {
    std::string msg = "sketch returns '" + got + "' instead of '" + label + "' when";
    for (std::size_t i = 0; i < table.size(); ++i) msg += " " + table.key(i) + "=" + (v[i] ? "true" : "false");
    throw Error(ErrorCode::kContractViolation, msg);
  };
  std::size_t n = table.size();
  if (n <= 12) {
    std::vector<bool> v(n);
    for (std::uint32_t bits = 0; bits < (1u << n); ++bits) {
      for (std::size_t i = 0; i < n; ++i) v[i] = ((bits >> i) & 1u) != 0;
      if (!table.consistent(v) || !table.eval(phi, v)) continue;
      const auto& got = table.eval(*sketch.root, v);
      if (got != label) violation(v, got);
    }
    return;
  }
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  int checked = 0;
  for (int attempt = 0; checked < samples && attempt < samples * 50; ++attempt) {
    std::vector<bool> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = coin(rng);
    table.force(phi, v);
    table.repair(v, rng);
    if (!table.eval(phi, v)) continue;
    ++checked;
    const auto& got = table.eval(*sketch.root, v);
    if (got != label) violation(v, got);
  }
}

dsl::Sketch update_sketch(const std::optional<dsl::Sketch>& old, const CnfFormula& phi, const std::string& label,
                          const dsl::LabelSet& labels, const library::ConceptLibrary& lib,
                          const LmProvider& provider) {
  json ctx = {{"sketch", old ? json(dsl::print_program(*old)) : json(nullptr)},
              {"phi", cnf_to_json(phi)},
              {"phi_text", print_cnf(phi)},
              {"label", label},
              {"labels", labels.labels()},
              {"library", library_context(lib)}};
  auto reply = provider.complete("update_sketch", ctx);
  auto [sketch, expansions] = parse_reply("update_sketch", [&] {
    return std::make_pair(dsl::parse_program(require_string(reply, "sketch", "update_sketch"), labels),
                          expansions_from(reply));
  });
  return finish(sketch, phi, expansions, label, labels, lib);
}

std::string_view synth_mode_name(SynthMode mode) {
  switch (mode) {
    case SynthMode::kTwoStage: return "two-stage";
    case SynthMode::kDirect: return "direct";
    case SynthMode::kCodeAsPolicies: return "code-as-policies";
  }
  return "two-stage";
}

SynthMode synth_mode_from_name(std::string_view name) {
  for (auto m : {SynthMode::kTwoStage, SynthMode::kDirect, SynthMode::kCodeAsPolicies}) {
    if (synth_mode_name(m) == name) return m;
  }
  throw Error(ErrorCode::kSchema, "unknown synthesis mode '" + std::string(name) + "'");
}

dsl::Sketch synthesize_sketch(SynthMode mode, const std::optional<dsl::Sketch>& old, std::string_view explanation,
                              const library::ConceptLibrary& lib, const dsl::LabelSet& labels,
                              const LmProvider& provider) {
  if (mode == SynthMode::kTwoStage) {
    auto [phi, label] = nl_to_cnf(explanation, lib, labels, provider);
    return update_sketch(old, phi, label, labels, lib, provider);
  }
  json ctx = {{"explanation", explanation}, {"labels", labels.labels()}, {"library", library_context(lib)}};
  std::string id = mode == SynthMode::kDirect ? "synth_direct" : "synth_cap";
  if (mode == SynthMode::kDirect) {
    ctx["sketch"] = old ? json(dsl::print_program(*old)) : json(nullptr);
  } else {
    auto [rules, fallback] = old ? chain_rules(*old) : std::make_pair(json::array(), labels.fallback());
    ctx["rules"] = rules;
    ctx["fallback"] = fallback;
  }
  auto reply = provider.complete(id, ctx);
  std::string label = checked_label(reply, labels);
  auto [sketch, phi, expansions] = parse_reply(id, [&] {
    CnfFormula phi = cnf_from_json(reply.at("clauses"));
    if (mode == SynthMode::kDirect) {
      return std::make_tuple(dsl::parse_program(require_string(reply, "sketch", id), labels), phi,
                             expansions_from(reply));
    }
    // Rules are tried in order; the last leaf is the fallback label.
    dsl::NodePtr node = dsl::leaf(reply.value("fallback", labels.fallback()));
    const auto& rules = reply.at("rules");
    for (auto it = rules.rbegin(); it != rules.rend(); ++it) {
      node = dsl::branch(dsl::parse_condition(it->at("condition").get<std::string>()),
                         dsl::leaf(it->at("label").get<std::string>()), node);
    }
    return std::make_tuple(dsl::Sketch{node}, phi, expansions_from(reply));
  });
  check_literals(phi, lib);
  return finish(sketch, phi, expansions, label, labels, lib);
}

std::optional<PredicateDefinition> define_predicate(std::string_view name, std::string_view explanation,
                                                    const library::ConceptLibrary& lib, const LmProvider& provider) {
  auto reply = provider.complete("define_predicate",
                                 {{"name", name}, {"explanation", explanation}, {"library", library_context(lib)}});
  return parse_reply("define_predicate", [&]() -> std::optional<PredicateDefinition> {
    if (!reply.value("found", false)) return std::nullopt;
    PredicateDefinition def;
    def.params = params_from_json(reply.at("params"));
    auto bool_labels = dsl::LabelSet::boolean();
    if (reply.contains("body") && reply["body"].is_string()) {
      def.body = dsl::parse_program(reply["body"].get<std::string>(), bool_labels);
      if (!dsl::free_holes(*def.body).empty()) {
        throw Error(ErrorCode::kProviderResponse, "definition body of '" + std::string(name) + "' has holes");
      }
    }
    if (reply.contains("sketch") && reply["sketch"].is_string()) {
      def.sketch = dsl::parse_program(reply["sketch"].get<std::string>(), bool_labels);
    }
    if (!def.body && !def.sketch) {
      throw Error(ErrorCode::kProviderResponse, "definition of '" + std::string(name) + "' has neither body nor sketch");
    }
    return def;
  });
}

}  // namespace prefprog::synthesis
