#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "prefprog/dsl/evaluator.hpp"
#include "prefprog/dsl/syntax.hpp"
#include "prefprog/error.hpp"
#include "prefprog/io.hpp"
#include "prefprog/synthesis/scripted_lm.hpp"
#include "prefprog/synthesis/synthesis.hpp"
#include "support/generators.hpp"

namespace prefprog {
namespace {

using synthesis::CnfFormula;
using synthesis::Literal;
using synthesis::SynthMode;

const char* kRunning =
    "Good place to stop since it sits on the sidewalk, away from the person and the car, and is not in the way.";

const synthesis::ScriptedLmProvider& lm() {
  static auto p = synthesis::ScriptedLmProvider::from_file(std::string(PREFPROG_DATA_DIR) + "/scripted_lm.json");
  return p;
}

const library::ConceptLibrary& lib() {
  static auto l = testing::concept_fixture_library();
  return l;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kIo;
}

CnfFormula running_phi() {
  return {{{{"is_on", {"q", "sidewalk"}, false}},
           {{"is_far", {"q", "person"}, false}},
           {{"is_far", {"q", "car"}, false}},
           {{"in_way", {"q"}, true}}}};
}

const char* kRunningSketch =
    "(if (and (is_on q sidewalk) (> (dist_to q person) ??h_is_far_person[0,50]) "
    "(> (dist_to q car) ??h_is_far_car[0,50]) (not (in_way q))) (leaf good) (leaf bad))";

TEST(NormalizeText, LowercasesAndKeepsCommas) {
  EXPECT_EQ(synthesis::normalize_text("  It's GOOD;  on the Sidewalk,far!"), "it's good on the sidewalk, far");
}

TEST(ExtractEntities, RunningExample) {
  EXPECT_EQ(synthesis::extract_entities(kRunning, library::ConceptLibrary(), lm()),
            (std::vector<std::string>{"sidewalk", "person", "car"}));
}

TEST(ExtractEntities, EmptyAndDuplicates) {
  EXPECT_TRUE(synthesis::extract_entities("good because it is flat", lib(), lm()).empty());
  EXPECT_EQ(synthesis::extract_entities("bad: the car is right next to another car", lib(), lm()),
            std::vector<std::string>{"car"});
}

TEST(ExtractEntities, LibraryEntitiesAreRecognized) {
  auto l = library::ConceptLibrary().add_entity("traffic_cone");
  EXPECT_EQ(synthesis::extract_entities("bad, too close to the traffic cone", l, lm()),
            std::vector<std::string>{"traffic_cone"});
}

TEST(ExtractPredicates, RunningExample) {
  auto preds = synthesis::extract_predicates(kRunning, library::ConceptLibrary(), lm());
  std::vector<std::string> names;
  for (const auto& p : preds) names.push_back(p.name);
  EXPECT_EQ(names, (std::vector<std::string>{"is_on", "is_far", "in_way"}));
  EXPECT_EQ(preds[1].params.size(), 2u);
  EXPECT_EQ(preds[2].params.size(), 1u);
}

TEST(ExtractPredicates, DistinctPhrasesDistinctNames) {
  auto preds = synthesis::extract_predicates("good because it is far from the car and not close to the person",
                                             lib(), lm());
  ASSERT_EQ(preds.size(), 2u);
  EXPECT_EQ(preds[0].name, "is_far");
  EXPECT_EQ(preds[1].name, "is_close");
}

TEST(ExtractPredicates, KnownPredicatesOnly) {
  for (const auto& p : synthesis::extract_predicates(kRunning, lib(), lm())) EXPECT_TRUE(lib().contains(p.name));
}

TEST(NlToCnf, RunningExample) {
  auto out = synthesis::nl_to_cnf(kRunning, lib(), dsl::LabelSet::binary(), lm());
  EXPECT_EQ(out.label, "good");
  EXPECT_EQ(out.phi, running_phi());
  EXPECT_EQ(synthesis::print_cnf(out.phi), "is_on(q, sidewalk) & is_far(q, person) & is_far(q, car) & !in_way(q)");
}

TEST(NlToCnf, RoadIsBad) {
  auto out = synthesis::nl_to_cnf("this spot is bad because it is on the road", lib(), dsl::LabelSet::binary(), lm());
  EXPECT_EQ(out.label, "bad");
  EXPECT_EQ(out.phi, (CnfFormula{{{{"is_on", {"q", "road"}, false}}}}));
}

TEST(NlToCnf, Errors) {
  EXPECT_EQ(code_of([] { synthesis::nl_to_cnf("good because it is close to the car", lib(), dsl::LabelSet::binary(), lm()); }),
            ErrorCode::kUnresolvedPredicate);
  EXPECT_EQ(code_of([] { synthesis::nl_to_cnf("it is on the road", lib(), dsl::LabelSet::binary(), lm()); }),
            ErrorCode::kUnknownLabel);
}

TEST(UpdateSketch, FreshSketchExpandsThresholds) {
  auto s = synthesis::update_sketch(std::nullopt, running_phi(), "good", dsl::LabelSet::binary(), lib(), lm());
  EXPECT_EQ(s, dsl::parse_program(kRunningSketch));
  EXPECT_EQ(dsl::free_holes(s), (std::set<std::string>{"h_is_far_car", "h_is_far_person"}));
}

TEST(UpdateSketch, FixpointWhenAlreadyImplied) {
  auto s = synthesis::update_sketch(std::nullopt, running_phi(), "good", dsl::LabelSet::binary(), lib(), lm());
  auto again = synthesis::update_sketch(s, running_phi(), "good", dsl::LabelSet::binary(), lib(), lm());
  EXPECT_EQ(dsl::print_program(again), dsl::print_program(s));
}

TEST(UpdateSketch, FallbackLabelLeavesChainUnchanged) {
  auto s = synthesis::update_sketch(std::nullopt, running_phi(), "good", dsl::LabelSet::binary(), lib(), lm());
  CnfFormula road{{{{"is_on", {"q", "road"}, false}}}};
  EXPECT_EQ(synthesis::update_sketch(s, road, "bad", dsl::LabelSet::binary(), lib(), lm()), s);
}

TEST(UpdateSketch, DisjointRegionPreservesOldBehaviour) {
  auto labels = dsl::LabelSet::binary();
  auto s = synthesis::update_sketch(std::nullopt, running_phi(), "good", labels, lib(), lm());
  CnfFormula grass{{{{"is_on", {"q", "grass"}, false}}, {{"is_far", {"q", "car"}, false}}}};
  auto s2 = synthesis::update_sketch(s, grass, "good", labels, lib(), lm());
  EXPECT_NE(s2, s);
  // Where the new condition is false both sketches agree on every cell.
  auto sc = scene::load_scene(std::string(PREFPROG_FIXTURE_DIR) + "/campus_01.json");
  dsl::Assignment a{{"h_is_far_car", 2.0}, {"h_is_far_person", 1.5}};
  auto new_phi = synthesis::cnf_condition(grass, {{"(is_far q car)", "(> (dist_to q car) ??h_is_far_car[0,50])"}});
  auto cond_sketch = dsl::Sketch{dsl::branch(new_phi, dsl::leaf("good"), dsl::leaf("bad"))};
  for (int r = 0; r < sc.height; ++r) {
    for (int c = 0; c < sc.width; ++c) {
      if (dsl::evaluate_with_holes(cond_sketch, a, sc, {r, c}, lib()) == "good") {
        EXPECT_EQ(dsl::evaluate_with_holes(s2, a, sc, {r, c}, lib()), "good");
      } else {
        EXPECT_EQ(dsl::evaluate_with_holes(s2, a, sc, {r, c}, lib()), dsl::evaluate_with_holes(s, a, sc, {r, c}, lib()));
      }
    }
  }
}

TEST(UpdateSketch, ContradictingExplanationRejected) {
  auto labels = dsl::LabelSet::binary();
  auto s = synthesis::update_sketch(std::nullopt, running_phi(), "good", labels, lib(), lm());
  // "bad because it is far from the car" can hold together with the good guard.
  CnfFormula far{{{{"is_far", {"q", "car"}, false}}}};
  EXPECT_EQ(code_of([&] { synthesis::update_sketch(s, far, "bad", labels, lib(), lm()); }),
            ErrorCode::kContractViolation);
  // The negated atom is exclusive with the guard and is accepted.
  CnfFormula near{{{{"is_far", {"q", "car"}, true}}}};
  EXPECT_EQ(synthesis::update_sketch(s, near, "bad", labels, lib(), lm()), s);
}

class LyingProvider : public synthesis::LmProvider {
 public:
  nlohmann::json complete(const std::string&, const nlohmann::json&) const override {
    return {{"sketch", "(leaf bad)"}, {"expansions", nlohmann::json::object()}};
  }
  const synthesis::LmConfig& config() const override { return config_; }

 private:
  synthesis::LmConfig config_;
};

TEST(UpdateSketch, ProviderBreakingContractRejected) {
  EXPECT_EQ(code_of([] {
              synthesis::update_sketch(std::nullopt, running_phi(), "good", dsl::LabelSet::binary(), lib(),
                                       LyingProvider());
            }),
            ErrorCode::kContractViolation);
}

TEST(ContractCheck, PartitioningAtomsAreExclusive) {
  auto s = dsl::parse_program("(if (is_on q sidewalk) (leaf good) (leaf bad))");
  synthesis::check_sketch_contract(s, *dsl::parse_condition("(is_on q road)"), "bad", lib());
  EXPECT_EQ(code_of([&] { synthesis::check_sketch_contract(s, *dsl::parse_condition("(in_way q)"), "bad", lib()); }),
            ErrorCode::kContractViolation);
}

// Pool of explanations used by the order and mode properties.
const std::vector<std::string>& pool() {
  static const std::vector<std::string> p = {
      kRunning,
      "good, on the grass, far from the car and the person, and not in the way",
      "bad because it is on the road",
      "bad since it is in the way",
      "bad because it is not far from the person",
      "bad because it is not far from the car",
      "good since it is on the pavement and far away from the person and the car and not in the way",
  };
  return p;
}

dsl::Sketch run(SynthMode mode, const std::vector<std::string>& explanations) {
  std::optional<dsl::Sketch> s;
  for (const auto& e : explanations) s = synthesis::synthesize_sketch(mode, s, e, lib(), dsl::LabelSet::binary(), lm());
  return *s;
}

TEST(SynthesizeSketch, OrderRobustMerge) {
  auto base = run(SynthMode::kTwoStage, pool());
  testing::Rng rng(3);
  for (int i = 0; i < 30; ++i) {
    auto perm = pool();
    std::shuffle(perm.begin(), perm.end(), rng);
    ASSERT_EQ(dsl::print_program(run(SynthMode::kTwoStage, perm)), dsl::print_program(base));
  }
}

TEST(SynthesizeSketch, ModesAgree) {
  auto two = run(SynthMode::kTwoStage, pool());
  EXPECT_EQ(run(SynthMode::kDirect, pool()), two);
  EXPECT_EQ(run(SynthMode::kCodeAsPolicies, pool()), two);
  EXPECT_EQ(synthesis::synth_mode_from_name("code-as-policies"), SynthMode::kCodeAsPolicies);
  EXPECT_EQ(code_of([] { synthesis::synth_mode_from_name("magic"); }), ErrorCode::kSchema);
}

TEST(SynthesizeSketch, ScriptedProviderIsDeterministic) {
  nlohmann::json ctx = {{"explanation", kRunning}, {"labels", {"good", "bad"}}, {"library", synthesis::library_context(lib())}};
  for (const char* id : {"extract_entities", "extract_predicates", "nl_to_cnf", "synth_direct"}) {
    if (std::string(id) == "synth_direct") ctx["sketch"] = nullptr;
    EXPECT_EQ(lm().complete(id, ctx).dump(), lm().complete(id, ctx).dump()) << id;
  }
}

// Independent check of the soundness contract: every atom valuation in which
// phi holds must reach the stated label. Atoms are keyed by printed text.
struct Valuation {
  std::map<std::string, bool> atoms;
  bool cond(const dsl::Cond& c) const {
    if (const auto* b = std::get_if<dsl::BoolLit>(&c.node)) return b->value;
    if (std::holds_alternative<dsl::Atom>(c.node)) return atoms.at(dsl::print_condition(c));
    if (const auto* n = std::get_if<dsl::Not>(&c.node)) return !cond(*n->arg);
    if (const auto* a = std::get_if<dsl::And>(&c.node)) {
      for (const auto& x : a->args) {
        if (!cond(*x)) return false;
      }
      return true;
    }
    for (const auto& x : std::get<dsl::Or>(c.node).args) {
      if (cond(*x)) return true;
    }
    return false;
  }
  std::string node(const dsl::Node& n) const {
    if (const auto* l = std::get_if<dsl::Leaf>(&n.node)) return l->label;
    const auto& b = std::get<dsl::Branch>(n.node);
    return cond(*b.cond) ? node(*b.then_branch) : node(*b.else_branch);
  }
};

void atoms_of(const dsl::Cond& c, std::set<std::string>& out) {
  if (std::holds_alternative<dsl::Atom>(c.node)) out.insert(dsl::print_condition(c));
  if (const auto* n = std::get_if<dsl::Not>(&c.node)) atoms_of(*n->arg, out);
  if (const auto* a = std::get_if<dsl::And>(&c.node)) {
    for (const auto& x : a->args) atoms_of(*x, out);
  }
  if (const auto* o = std::get_if<dsl::Or>(&c.node)) {
    for (const auto& x : o->args) atoms_of(*x, out);
  }
}

void atoms_of(const dsl::Node& n, std::set<std::string>& out) {
  if (const auto* b = std::get_if<dsl::Branch>(&n.node)) {
    atoms_of(*b->cond, out);
    atoms_of(*b->then_branch, out);
    atoms_of(*b->else_branch, out);
  }
}

TEST(SynthesisProperties, UpdateSoundOnRandomValuations) {
  testing::Rng rng(41);
  auto labels = dsl::LabelSet::binary();
  for (int round = 0; round < 40; ++round) {
    std::optional<dsl::Sketch> s;
    auto perm = pool();
    std::shuffle(perm.begin(), perm.end(), rng);
    for (const auto& e : perm) {
      auto [phi, label] = synthesis::nl_to_cnf(e, lib(), labels, lm());
      auto reply = lm().complete("update_sketch", {{"sketch", s ? nlohmann::json(dsl::print_program(*s)) : nlohmann::json()},
                                                    {"phi", synthesis::cnf_to_json(phi)},
                                                    {"label", label},
                                                    {"labels", labels.labels()}});
      s = synthesis::update_sketch(s, phi, label, labels, lib(), lm());
      auto expanded = synthesis::cnf_condition(phi, reply["expansions"].get<synthesis::Expansions>());
      std::set<std::string> names;
      atoms_of(*expanded, names);
      atoms_of(*s->root, names);
      int hits = 0;
      for (int k = 0; k < 1000 && hits < 200; ++k) {
        Valuation v;
        std::string on_terrain;
        for (const auto& n : names) v.atoms[n] = testing::coin(rng);
        // Terrain atoms: at most one holds.
        for (auto& [n, val] : v.atoms) {
          if (n.rfind("(is_on q ", 0) != 0 || !val) continue;
          if (on_terrain.empty()) {
            on_terrain = n;
          } else {
            val = false;
          }
        }
        if (!v.cond(*expanded)) continue;
        ++hits;
        ASSERT_EQ(v.node(*s->root), label) << e;
      }
    }
  }
}

TEST(DefinePredicate, TableDefaultsAndFallback) {
  auto far = synthesis::define_predicate("is_far", "more than a few meters away", lib(), lm());
  ASSERT_TRUE(far.has_value());
  ASSERT_TRUE(far->body.has_value());
  EXPECT_EQ(*far->body, dsl::parse_program("(if (> (dist_to q e) 3.0) (leaf true) (leaf false))",
                                           dsl::LabelSet::boolean()));
  EXPECT_TRUE(far->sketch.has_value());
  auto way = synthesis::define_predicate("in_way", "blocking the walkway", lib(), lm());
  ASSERT_TRUE(way.has_value());
  EXPECT_EQ(way->params.size(), 1u);
  EXPECT_FALSE(synthesis::define_predicate("is_shaded", "under a tree", lib(), lm()).has_value());
}

TEST(Prompts, RenderTemplate) {
  EXPECT_EQ(synthesis::render_template("a {{x}} b {{y}}", {{"x", "one"}, {"y", {1, 2}}}), "a one b [1,2]");
  EXPECT_EQ(code_of([] { synthesis::render_template("{{missing}}", nlohmann::json::object()); }), ErrorCode::kSchema);
}

TEST(Prompts, EveryTemplateRenders) {
  nlohmann::json ctx = {{"explanation", kRunning}, {"labels", {"good", "bad"}}, {"library", synthesis::library_context(lib())},
                        {"sketch", nullptr}, {"phi", nlohmann::json::array()}, {"phi_text", "true"}, {"label", "good"},
                        {"rules", nlohmann::json::array()}, {"fallback", "bad"}, {"name", "is_far"}};
  for (const char* id : {"extract_entities", "extract_predicates", "nl_to_cnf", "update_sketch", "synth_direct",
                         "synth_cap", "define_predicate"}) {
    auto text = io::read_text(std::string(PREFPROG_DATA_DIR) + "/prompts/" + id + ".txt");
    EXPECT_NO_THROW(synthesis::render_template(text, ctx)) << id;
  }
}

TEST(HttpProvider, DefaultsAndMissingEndpoint) {
  synthesis::HttpLmProvider p("", "", std::string(PREFPROG_DATA_DIR) + "/prompts");
  EXPECT_DOUBLE_EQ(p.config().temperature, 0.0);
  EXPECT_EQ(p.config().seed, 0);
  EXPECT_EQ(p.config().stop, "END");
  EXPECT_EQ(code_of([&] { p.complete("extract_entities", {{"explanation", "x"}, {"library", {}}}); }),
            ErrorCode::kProviderFailure);
}

}  // namespace
}  // namespace prefprog
