#include "prefprog/synthesis/scripted_lm.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include "prefprog/dsl/syntax.hpp"
#include "prefprog/error.hpp"
#include "prefprog/io.hpp"
#include "prefprog/synthesis/synthesis.hpp"

namespace prefprog::synthesis {

using nlohmann::json;

namespace {

std::string regex_escape(const std::string& s) {
  static const std::string special = R"(\^$.|?*+()[]{})";
  std::string out;
  for (char c : s) {
    if (special.find(c) != std::string::npos) out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

bool has_phrase(const std::string& text, const std::string& phrase) {
  std::regex re("(^|[^a-z0-9_])" + regex_escape(phrase) + "($|[^a-z0-9_])");
  return std::regex_search(text, re);
}

void replace_all(std::string& s, const std::string& from, const std::string& to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

// Disjuncts of a guard, printed.
void add_disjuncts(const dsl::CondPtr& c, std::set<std::string>& out) {
  if (const auto* o = std::get_if<dsl::Or>(&c->node)) {
    for (const auto& a : o->args) add_disjuncts(a, out);
    return;
  }
  out.insert(dsl::print_condition(*c));
}

json chain_of_sketch(const std::string& text, const json& labels) {
  std::vector<std::string> ls = labels.get<std::vector<std::string>>();
  auto sketch = dsl::parse_program(text, dsl::LabelSet(ls));
  json rules = json::array();
  const dsl::Node* n = sketch.root.get();
  while (const auto* b = std::get_if<dsl::Branch>(&n->node)) {
    const auto* leaf = std::get_if<dsl::Leaf>(&b->then_branch->node);
    if (!leaf) throw Error(ErrorCode::kProviderFailure, "scripted provider can only extend decision chains");
    rules.push_back({{"label", leaf->label}, {"condition", dsl::print_condition(*b->cond)}});
    n = b->else_branch.get();
  }
  return {{"rules", rules}, {"fallback", std::get<dsl::Leaf>(n->node).label}};
}

std::string sketch_of_chain(const json& chain) {
  dsl::NodePtr node = dsl::leaf(chain.at("fallback").get<std::string>());
  const auto& rules = chain.at("rules");
  for (auto it = rules.rbegin(); it != rules.rend(); ++it) {
    node = dsl::branch(dsl::parse_condition(it->at("condition").get<std::string>()),
                       dsl::leaf(it->at("label").get<std::string>()), node);
  }
  return dsl::print_program(dsl::Sketch{node});
}

}  // namespace

std::string normalize_text(std::string_view text) {
  std::string out;
  bool space = true;
  for (char raw : text) {
    auto c = static_cast<unsigned char>(raw);
    char ch = static_cast<char>(std::tolower(c));
    if (std::isalnum(c) != 0 || ch == '\'' || ch == '_') {
      out.push_back(ch);
      space = false;
    } else if (ch == ',') {
      if (!out.empty() && out.back() == ' ') out.pop_back();
      out += ", ";
      space = true;
    } else if (!space) {
      out.push_back(' ');
      space = true;
    }
  }
  while (!out.empty() && (out.back() == ' ' || out.back() == ',')) out.pop_back();
  return out;
}

ScriptedLmProvider::ScriptedLmProvider(json table) : table_(std::move(table)) {
  if (table_.value("format_version", 0) != kScriptedTableFormat) {
    throw Error(ErrorCode::kVersionFormat, "scripted mapping table has an unsupported format_version");
  }
  for (const char* key : {"labels", "entities", "predicates", "expansions", "definitions"}) {
    if (!table_.contains(key)) throw Error(ErrorCode::kSchema, std::string("scripted mapping table lacks '") + key + "'");
  }
  config_.model = "scripted-v" + std::to_string(kScriptedTableFormat);
}

ScriptedLmProvider ScriptedLmProvider::from_file(const std::filesystem::path& path) {
  return ScriptedLmProvider(io::read_json(path));
}

std::vector<std::pair<std::string, std::string>> ScriptedLmProvider::aliases(const json& library) const {
  std::vector<std::pair<std::string, std::string>> out;  // alias, entity
  for (const auto& [name, words] : table_["entities"].items()) {
    for (const auto& w : words) out.emplace_back(w.get<std::string>(), name);
  }
  if (library.contains("entities")) {
    for (const auto& e : library["entities"]) {
      std::string name = e.get<std::string>();
      std::string spoken = name;
      std::replace(spoken.begin(), spoken.end(), '_', ' ');
      out.emplace_back(spoken, name);
    }
  }
  // Longest alias first so "sidewalks" wins over "sidewalk".
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
  return out;
}

std::vector<std::string> ScriptedLmProvider::entities_in(const std::string& text, const json& library) const {
  std::vector<std::pair<std::size_t, std::string>> found;
  std::vector<bool> taken(text.size(), false);
  for (const auto& [alias, name] : aliases(library)) {
    std::regex re("(^|[^a-z0-9_])(" + regex_escape(alias) + ")(?=$|[^a-z0-9_])");
    for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
      auto pos = static_cast<std::size_t>(it->position(2));
      if (taken[pos]) continue;
      for (std::size_t i = 0; i < alias.size(); ++i) taken[pos + i] = true;
      found.emplace_back(pos, name);
    }
  }
  std::sort(found.begin(), found.end());
  std::vector<std::string> out;
  for (const auto& [pos, name] : found) {
    if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
  }
  return out;
}

std::vector<ScriptedLmProvider::Match> ScriptedLmProvider::predicate_matches(const std::string& text,
                                                                             const json& library) const {
  std::string alt;
  for (const auto& [alias, name] : aliases(library)) alt += (alt.empty() ? "" : "|") + regex_escape(alias);
  std::string one = "(?:(?:the|a|an) )?(?:" + alt + ")";
  std::string many = one + "(?:(?: ,)? (?:and|or) " + one + "| , " + one + ")*";
  std::vector<Match> out;
  std::vector<bool> taken(text.size(), false);
  for (const auto& rule : table_["predicates"]) {
    for (const auto& pat : rule["patterns"]) {
      std::string p = regex_escape(pat.get<std::string>());
      replace_all(p, "\\{entities\\}", "(" + many + ")");
      replace_all(p, "\\{entity\\}", "(" + one + ")");
      std::regex re("(^|[^a-z0-9_])(" + p + ")(?=$|[^a-z0-9_])");
      for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
        auto pos = static_cast<std::size_t>(it->position(2));
        if (taken[pos]) continue;
        auto len = static_cast<std::size_t>(it->length(2));
        for (std::size_t i = 0; i < len; ++i) taken[pos + i] = true;
        Match m{pos, rule["name"].get<std::string>(), {}, false};
        if (it->size() > 3 && (*it)[3].matched) m.entities = entities_in((*it)[3].str(), library);
        std::string before = text.substr(0, pos);
        for (const auto& neg : table_.value("negations", json::array())) {
          auto n = neg.get<std::string>();
          if (before.size() >= n.size() && before.compare(before.size() - n.size(), n.size(), n) == 0) m.negated = true;
        }
        out.push_back(std::move(m));
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const Match& a, const Match& b) { return a.position < b.position; });
  return out;
}

json ScriptedLmProvider::label_of(const std::string& text, const json& labels) const {
  std::string head = text;
  for (const auto& c : table_.value("connectors", json::array())) {
    std::regex re("(^|[^a-z0-9_])" + regex_escape(c.get<std::string>()) + "($|[^a-z0-9_])");
    std::smatch m;
    if (std::regex_search(head, m, re)) head = head.substr(0, static_cast<std::size_t>(m.position(0)));
  }
  for (const auto& scope : {head, text}) {
    for (const auto& rule : table_["labels"]) {
      auto label = rule["label"].get<std::string>();
      if (std::find(labels.begin(), labels.end(), label) == labels.end()) continue;
      for (const auto& phrase : rule["phrases"]) {
        if (has_phrase(scope, phrase.get<std::string>())) return label;
      }
    }
  }
  return nullptr;
}

json ScriptedLmProvider::cnf_of(const std::string& text, const json& library) const {
  json clauses = json::array();
  std::set<std::string> seen;
  for (const auto& m : predicate_matches(text, library)) {
    std::vector<std::vector<std::string>> arg_lists;
    if (m.entities.empty()) {
      arg_lists.push_back({"q"});
    } else {
      for (const auto& e : m.entities) arg_lists.push_back({"q", e});
    }
    for (const auto& args : arg_lists) {
      json lit = {{"predicate", m.predicate}, {"args", args}, {"negated", m.negated}};
      if (seen.insert(lit.dump()).second) clauses.push_back(json::array({lit}));
    }
  }
  return clauses;
}

json ScriptedLmProvider::expansions_of(const json& clauses) const {
  json out = json::object();
  for (const auto& clause : clauses) {
    for (const auto& lit : clause) {
      auto pred = lit["predicate"].get<std::string>();
      if (!table_["expansions"].contains(pred)) continue;
      std::string text = table_["expansions"][pred].get<std::string>();
      const json* params = nullptr;
      for (const auto& r : table_["predicates"]) {
        if (r["name"] == pred) params = &r["params"];
      }
      auto args = lit["args"].get<std::vector<std::string>>();
      if (params == nullptr || params->size() != args.size()) continue;
      for (std::size_t i = 0; i < args.size(); ++i) {
        replace_all(text, "{" + (*params)[i]["name"].get<std::string>() + "}", args[i]);
      }
      Literal l{pred, args, false};
      out[dsl::print_condition(*literal_atom(l))] = text;
    }
  }
  return out;
}

json ScriptedLmProvider::merge(const json& rules, const std::string& fallback, const json& clauses,
                               const std::string& label, const json& labels) const {
  std::map<std::string, std::set<std::string>> guards;
  for (const auto& r : rules) {
    add_disjuncts(dsl::parse_condition(r["condition"].get<std::string>()), guards[r["label"].get<std::string>()]);
  }
  if (label != fallback && !clauses.empty()) {
    Expansions ex = expansions_of(clauses).get<Expansions>();
    add_disjuncts(cnf_condition(cnf_from_json(clauses), ex), guards[label]);
  }
  json out_rules = json::array();
  for (const auto& l : labels) {
    auto name = l.get<std::string>();
    if (name == fallback || guards[name].empty()) continue;
    std::vector<dsl::CondPtr> parts;
    for (const auto& text : guards[name]) parts.push_back(dsl::parse_condition(text));
    auto guard = parts.size() == 1 ? parts.front() : dsl::disj(std::move(parts));
    out_rules.push_back({{"label", name}, {"condition", dsl::print_condition(*guard)}});
  }
  return {{"rules", out_rules}, {"fallback", fallback}};
}

json ScriptedLmProvider::complete(const std::string& template_id, const json& context) const {
  const json empty_lib = json::object();
  const json& library = context.contains("library") ? context["library"] : empty_lib;
  auto text = [&] { return normalize_text(context.at("explanation").get<std::string>()); };

  if (template_id == "extract_entities") return {{"entities", entities_in(text(), library)}};

  if (template_id == "extract_predicates") {
    json preds = json::array();
    std::set<std::string> seen;
    for (const auto& m : predicate_matches(text(), library)) {
      if (!seen.insert(m.predicate).second) continue;
      for (const auto& r : table_["predicates"]) {
        if (r["name"] == m.predicate) preds.push_back({{"name", m.predicate}, {"params", r["params"]}});
      }
    }
    return {{"predicates", preds}};
  }

  if (template_id == "nl_to_cnf") {
    return {{"label", label_of(text(), context.at("labels"))}, {"clauses", cnf_of(text(), library)}};
  }

  if (template_id == "update_sketch") {
    const json& labels = context.at("labels");
    json chain = context["sketch"].is_string() ? chain_of_sketch(context["sketch"].get<std::string>(), labels)
                                               : json{{"rules", json::array()}, {"fallback", labels.back()}};
    const json& clauses = context.at("phi");
    auto merged = merge(chain["rules"], chain["fallback"].get<std::string>(), clauses,
                        context.at("label").get<std::string>(), labels);
    return {{"sketch", sketch_of_chain(merged)}, {"expansions", expansions_of(clauses)}};
  }

  if (template_id == "synth_direct" || template_id == "synth_cap") {
    const json& labels = context.at("labels");
    json label = label_of(text(), labels);
    json clauses = cnf_of(text(), library);
    json chain;
    if (template_id == "synth_direct") {
      chain = context["sketch"].is_string() ? chain_of_sketch(context["sketch"].get<std::string>(), labels)
                                            : json{{"rules", json::array()}, {"fallback", labels.back()}};
    } else {
      chain = {{"rules", context.at("rules")}, {"fallback", context.at("fallback")}};
    }
    json reply = {{"label", label}, {"clauses", clauses}, {"expansions", expansions_of(clauses)}};
    if (!label.is_string()) return reply;
    auto merged = merge(chain["rules"], chain["fallback"].get<std::string>(), clauses, label.get<std::string>(), labels);
    if (template_id == "synth_direct") {
      reply["sketch"] = sketch_of_chain(merged);
    } else {
      reply["rules"] = merged["rules"];
      reply["fallback"] = merged["fallback"];
    }
    return reply;
  }

  if (template_id == "define_predicate") {
    auto name = context.at("name").get<std::string>();
    if (!table_["definitions"].contains(name)) return {{"found", false}};
    json def = table_["definitions"][name];
    def["found"] = true;
    return def;
  }

  throw Error(ErrorCode::kProviderFailure, "scripted provider has no template '" + template_id + "'");
}

}  // namespace prefprog::synthesis
