#include <gtest/gtest.h>

#include <algorithm>

#include "prefprog/dsl/evaluator.hpp"
#include "prefprog/dsl/syntax.hpp"
#include "prefprog/error.hpp"
#include "prefprog/params/demonstration.hpp"
#include "prefprog/params/formula.hpp"
#include "prefprog/params/partial_eval.hpp"
#include "prefprog/params/solver.hpp"
#include "support/generators.hpp"

namespace prefprog {
namespace {

using dsl::parse_condition;
using dsl::parse_program;
using params::Demonstration;
using params::WeightedFormula;

std::shared_ptr<const scene::Scene> campus() {
  static auto s = std::make_shared<const scene::Scene>(
      scene::load_scene(std::string(PREFPROG_FIXTURE_DIR) + "/campus_01.json"));
  return s;
}

Demonstration demo_at(scene::Cell cell, const std::string& label, const std::string& id = "") {
  return params::make_demonstration(campus(), {{cell, label}}, "demo at a cell", id);
}

const library::ConceptLibrary& lib() {
  static auto l = testing::concept_fixture_library();
  return l;
}

const scene::PerceptionProvider& perception() { return dsl::default_perception(); }

const char* kThreshold = "(if (> (dist_to q car) ??h1) (leaf good) (leaf bad))";

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kIo;
}

WeightedFormula formula_of(std::vector<std::pair<std::string, std::string>> clauses) {
  WeightedFormula wf;
  for (auto& [origin, text] : clauses) {
    auto c = parse_condition(text);
    wf.clauses.push_back({c, 1, origin});
    for (const auto& [name, b] : dsl::hole_bounds(dsl::Sketch{dsl::branch(c, dsl::leaf("good"), dsl::leaf("bad"))})) {
      wf.holes[name] = b;
    }
  }
  return wf;
}

// (6,1) is 5.0 from the nearest car cell (1,1); (2,1) is 1.0 away.
TEST(PartialEval, FoldsDistanceIntoResidual) {
  auto r = params::partial_eval(parse_program(kThreshold), demo_at({6, 1}, "good"), 0, lib(), perception());
  EXPECT_EQ(r.label, "good");
  EXPECT_EQ(r.sketch, parse_program("(if (> 5.0 ??h1) (leaf good) (leaf bad))"));
}

TEST(PartialEval, HoleFreeSketchFoldsToLeaf) {
  auto s = parse_program("(if (and (is_on q sidewalk) (is_far q car)) (leaf good) (leaf bad))");
  auto r = params::partial_eval(s, demo_at({6, 3}, "bad"), 0, lib(), perception());
  EXPECT_EQ(r.sketch, parse_program("(leaf good)"));
  EXPECT_EQ(r.label, "bad");
}

TEST(PartialEval, UnreachableHoleBranchDisappears) {
  auto s = parse_program("(if (is_on q road) (if (> (dist_to q car) ??h1) (leaf good) (leaf bad)) (leaf bad))");
  auto d = demo_at({6, 3}, "bad");
  auto r = params::partial_eval(s, d, 0, lib(), perception());
  EXPECT_TRUE(dsl::free_holes(r.sketch).empty());
  testing::Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    dsl::Assignment a{{"h1", testing::uniform_real(rng, 0.0, 20.0)}};
    ASSERT_EQ(params::evaluate_residual(r.sketch, a),
              dsl::evaluate_with_holes(s, a, *d.scene, {6, 3}, lib(), perception()));
  }
}

TEST(PartialEval, ErrorsCarrySourcePosition) {
  auto s = parse_program("(if (> (dist_to q zebra) ??h1) (leaf good) (leaf bad))");
  try {
    params::partial_eval(s, demo_at({0, 0}, "good"), 0, lib(), perception());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyMask);
    EXPECT_NE(std::string(e.what()).find("1:"), std::string::npos) << e.what();
  }
}

TEST(Guard, SinglePathAndComplement) {
  auto rs = parse_program("(if (> 5.0 ??h1) (leaf good) (leaf bad))");
  EXPECT_EQ(*params::guard_formula(rs, "good"), *parse_condition("(> 5.0 ??h1)"));
  EXPECT_EQ(*params::guard_formula(rs, "bad"), *parse_condition("(not (> 5.0 ??h1))"));
}

TEST(Guard, TwoPathsForRepeatedLabel) {
  auto rs = parse_program("(if (> 5.0 ??h1) (leaf good) (if (< 2.0 ??h2) (leaf good) (leaf bad)))");
  EXPECT_EQ(*params::guard_formula(rs, "good"),
            *parse_condition("(or (> 5.0 ??h1) (and (not (> 5.0 ??h1)) (< 2.0 ??h2)))"));
  EXPECT_EQ(*params::guard_formula(rs, "bad"),
            *parse_condition("(and (not (> 5.0 ??h1)) (not (< 2.0 ??h2)))"));
}

TEST(BuildConstraint, ClauseCounts) {
  auto s = parse_program(kThreshold);
  auto one = params::build_constraint(s, {demo_at({6, 1}, "good")}, lib(), dsl::LabelSet::binary(), perception());
  EXPECT_EQ(one.clauses.size(), 2u);
  EXPECT_EQ(one.total_weight(), 2);

  auto two = params::build_constraint(s, {demo_at({6, 1}, "good", "a"), demo_at({2, 1}, "bad", "b")}, lib(),
                                      dsl::LabelSet::binary(), perception());
  ASSERT_EQ(two.clauses.size(), 4u);
  EXPECT_EQ(two.clauses[0].origin, "a#000:+good");
  EXPECT_EQ(*two.clauses[0].formula, *parse_condition("(> 5.0 ??h1)"));
  EXPECT_EQ(two.clauses[1].origin, "a#000:-bad");
  EXPECT_EQ(*two.clauses[1].formula, *parse_condition("(not (not (> 5.0 ??h1)))"));
  EXPECT_EQ(two.clauses[2].origin, "b#000:+bad");
  EXPECT_EQ(*two.clauses[2].formula, *parse_condition("(not (> 1.0 ??h1))"));

  std::vector<Demonstration> many;
  for (int i = 0; i < 29; ++i) many.push_back(demo_at({i % 8, (i / 8) + 2}, i % 2 ? "good" : "bad"));
  EXPECT_EQ(params::build_constraint(s, many, lib(), dsl::LabelSet::binary(), perception()).clauses.size(), 58u);
}

TEST(BuildConstraint, OriginHelpers) {
  EXPECT_EQ(params::clause_origin("d-1", 3, false, "good"), "d-1#003:-good");
  EXPECT_EQ(params::origin_demo("d#x#002:+bad"), "d#x");
}

TEST(Solver, MidpointBetweenWitnesses) {
  auto wf = formula_of({{"a", "(> 5.0 ??h1)"}, {"b", "(not (> 1.0 ??h1))"}});
  auto r = params::solve_maxsmt(wf);
  EXPECT_EQ(r.satisfied_weight, 2);
  EXPECT_EQ(r.total_weight, 2);
  EXPECT_DOUBLE_EQ(r.assignment.at("h1"), 3.0);
  EXPECT_TRUE(r.unsat_origins.empty());
  EXPECT_TRUE(r.optimal);
  EXPECT_EQ(params::brute_force_oracle(wf).satisfied_weight, 2);
}

TEST(Solver, ContradictionDropsLaterOrigin) {
  auto wf = formula_of({{"a", "(> ??h1 2.0)"}, {"b", "(< ??h1 1.0)"}});
  auto r = params::solve_maxsmt(wf);
  EXPECT_EQ(r.satisfied_weight, 1);
  EXPECT_EQ(r.unsat_origins, std::vector<std::string>{"b"});
  EXPECT_GT(r.assignment.at("h1"), 2.0);
}

TEST(Solver, EmptyFormula) {
  WeightedFormula wf;
  wf.holes["h1"] = {2.0, 10.0};
  auto r = params::solve_maxsmt(wf);
  EXPECT_EQ(r.satisfied_weight, 0);
  EXPECT_EQ(r.total_weight, 0);
  EXPECT_DOUBLE_EQ(r.assignment.at("h1"), 2.0);
  auto o = params::brute_force_oracle(wf);
  EXPECT_EQ(o.satisfied_weight, 0);
  EXPECT_EQ(o.total_weight, 0);
}

TEST(Solver, RejectsMultiHoleAtom) {
  auto wf = formula_of({{"a", "(> ??h1 ??h2)"}});
  EXPECT_EQ(code_of([&] { params::solve_maxsmt(wf); }), ErrorCode::kUnsupportedAtom);
}

TEST(Solver, AffineForms) {
  // 7 - h1 >= 2  and  -1 * h1 < -1  ->  1 < h1 <= 5
  auto wf = formula_of({{"a", "(>= (- 7.0 ??h1) 2.0)"}, {"b", "(< (* -1.0 ??h1) -1.0)"}});
  auto r = params::solve_maxsmt(wf);
  EXPECT_EQ(r.satisfied_weight, 2);
  EXPECT_DOUBLE_EQ(r.assignment.at("h1"), 3.0);
}

TEST(Oracle, IndependentHolesAddUp) {
  auto wf = formula_of({{"a", "(> ??h1 2.0)"}, {"b", "(< ??h1 1.0)"}, {"c", "(> ??h2 4.0)"}, {"d", "(< ??h2 6.0)"}});
  auto h1 = formula_of({{"a", "(> ??h1 2.0)"}, {"b", "(< ??h1 1.0)"}});
  auto h2 = formula_of({{"c", "(> ??h2 4.0)"}, {"d", "(< ??h2 6.0)"}});
  EXPECT_EQ(params::brute_force_oracle(wf).satisfied_weight,
            params::brute_force_oracle(h1).satisfied_weight + params::brute_force_oracle(h2).satisfied_weight);
  EXPECT_EQ(params::brute_force_oracle(wf).satisfied_weight, 3);
}

TEST(Oracle, TooManyHoles) {
  auto wf = formula_of({{"a", "(and (> ??h1 1.0) (> ??h2 1.0) (> ??h3 1.0) (> ??h4 1.0))"}});
  EXPECT_EQ(code_of([&] { params::brute_force_oracle(wf); }), ErrorCode::kTooManyHoles);
}

TEST(Solver, GreedyAboveThreeHolesIsFlagged) {
  auto wf = formula_of({{"a", "(and (> ??h1 1.0) (> ??h2 1.0) (> ??h3 1.0) (> ??h4 1.0))"},
                        {"b", "(< ??h4 3.0)"}});
  auto r = params::solve_maxsmt(wf);
  EXPECT_FALSE(r.optimal);
  EXPECT_EQ(r.satisfied_weight, 2);
}

TEST(ParamSynth, ThresholdFromTwoDemos) {
  std::vector<Demonstration> demos{demo_at({6, 1}, "good"), demo_at({2, 1}, "bad")};
  auto out = params::param_synth(parse_program(kThreshold), demos, lib(), dsl::LabelSet::binary(), perception());
  EXPECT_EQ(out.program.sketch(), parse_program("(if (> (dist_to q car) 3.0) (leaf good) (leaf bad))"));
  for (const auto& d : demos) {
    EXPECT_EQ(dsl::evaluate(out.program, *d.scene, d.queries[0].cell, lib()), d.queries[0].label);
  }
}

TEST(ParamSynth, HoleFreeSketchUnchanged) {
  auto s = parse_program("(if (is_on q road) (leaf bad) (leaf good))");
  auto out = params::param_synth(s, {demo_at({6, 1}, "good")}, lib(), dsl::LabelSet::binary(), perception());
  EXPECT_EQ(out.program.sketch(), s);
}

// Five demos along column 0/1; the one at distance 6.0 is labeled bad.
std::vector<Demonstration> noisy_demos() {
  return {demo_at({7, 0}, "bad", "n1"), demo_at({6, 1}, "good", "n2"), demo_at({5, 0}, "good", "n3"),
          demo_at({2, 1}, "bad", "n4"), demo_at({3, 0}, "bad", "n5")};
}

TEST(ParamSynth, NoisyDemoIsReported) {
  auto demos = noisy_demos();
  auto wf = params::build_constraint(parse_program(kThreshold), demos, lib(), dsl::LabelSet::binary(), perception());
  auto oracle = params::brute_force_oracle(wf);
  EXPECT_EQ(oracle.satisfied_weight, wf.total_weight() - 2);
  auto out = params::param_synth(parse_program(kThreshold), demos, lib(), dsl::LabelSet::binary(), perception());
  EXPECT_EQ(out.solve.satisfied_weight, oracle.satisfied_weight);
  EXPECT_EQ(out.solve.unsat_demos(), std::vector<std::string>{"n1"});
  for (const auto& d : demos) {
    if (d.id == "n1") continue;
    EXPECT_EQ(dsl::evaluate(out.program, *d.scene, d.queries[0].cell, lib()), d.queries[0].label) << d.id;
  }
}

TEST(ParamSynth, PermutationInvariant) {
  auto demos = noisy_demos();
  auto s = parse_program("(if (and (> (dist_to q car) ??h1) (not (> (dist_to q person) ??h2))) (leaf good) (leaf bad))");
  auto base = params::param_synth(s, demos, lib(), dsl::LabelSet::binary(), perception());
  testing::Rng rng(9);
  for (int i = 0; i < 20; ++i) {
    std::shuffle(demos.begin(), demos.end(), rng);
    auto out = params::param_synth(s, demos, lib(), dsl::LabelSet::binary(), perception());
    ASSERT_EQ(out.program, base.program);
    ASSERT_EQ(out.solve.unsat_origins, base.solve.unsat_origins);
  }
}

TEST(Demonstration, IntrinsicIdAndRoundTrip) {
  auto a = demo_at({6, 1}, "good");
  auto b = demo_at({6, 1}, "good");
  EXPECT_EQ(a.id, b.id);
  EXPECT_EQ(a.id.rfind("d-", 0), 0u);
  EXPECT_NE(a.id, demo_at({6, 1}, "bad").id);
  auto back = params::demo_from_json(nlohmann::json::parse(params::demo_to_json(a).dump()));
  EXPECT_EQ(back, a);
}

TEST(Demonstration, Validation) {
  auto labels = dsl::LabelSet::binary();
  EXPECT_EQ(code_of([&] { params::validate(demo_at({6, 1}, "great"), labels); }), ErrorCode::kUnknownLabel);
  EXPECT_EQ(code_of([&] { params::validate(demo_at({9, 1}, "good"), labels); }), ErrorCode::kOutOfBounds);
  auto empty = params::make_demonstration(campus(), {}, "x");
  EXPECT_EQ(code_of([&] { params::validate(empty, labels); }), ErrorCode::kSchema);
}

// Property: substitute-then-evaluate equals partial-evaluate-then-substitute.
// Scenes always carry depth: partial evaluation folds concrete subterms on
// both sides of a hole-dependent branch, so a missing layer would raise there
// even when direct evaluation never reaches it.
TEST(ParamProperties, PartialEvalSoundness) {
  testing::Rng rng(101);
  for (int i = 0; i < 300; ++i) {
    auto sc = std::make_shared<const scene::Scene>(testing::random_scene(rng, 3, 10, 1.0));
    auto sketch = testing::random_sketch(rng);
    scene::Cell q{testing::uniform_int(rng, 0, sc->height - 1), testing::uniform_int(rng, 0, sc->width - 1)};
    auto d = params::make_demonstration(sc, {{q, "good"}}, "x");
    auto a = testing::random_assignment(rng, {"h1", "h2", "h3"});
    auto r = params::partial_eval(sketch, d, 0, lib(), perception());
    ASSERT_EQ(params::evaluate_residual(r.sketch, a), dsl::evaluate_with_holes(sketch, a, *sc, q, lib(), perception()))
        << dsl::print_program(sketch);
  }
}

TEST(ParamProperties, GuardPartition) {
  testing::Rng rng(102);
  testing::SketchGen g;
  g.scene_atoms = false;
  g.labels = {"good", "bad", "meh"};
  for (int i = 0; i < 300; ++i) {
    auto rs = testing::random_sketch(rng, g);
    auto a = testing::random_assignment(rng, g.holes);
    int hits = 0;
    for (const auto& l : g.labels) hits += params::evaluate_residual_condition(*params::guard_formula(rs, l), a);
    ASSERT_EQ(hits, 1) << dsl::print_program(rs);
    ASSERT_TRUE(params::evaluate_residual_condition(*params::guard_formula(rs, params::evaluate_residual(rs, a)), a));
  }
}

TEST(ParamProperties, SolverMatchesOracle) {
  testing::Rng rng(103);
  for (int i = 0; i < 100; ++i) {
    auto wf = testing::random_formula(rng);
    auto s = params::solve_maxsmt(wf);
    auto o = params::brute_force_oracle(wf);
    ASSERT_EQ(s.satisfied_weight, o.satisfied_weight) << params::dump_formula(wf);
    // Reported assignment really achieves the reported weight.
    int w = 0;
    for (const auto& c : wf.clauses) w += params::evaluate_residual_condition(*c.formula, s.assignment) ? c.weight : 0;
    ASSERT_EQ(w, s.satisfied_weight);
    for (const auto& [h, b] : wf.holes) {
      ASSERT_GE(s.assignment.at(h), b.first);
      ASSERT_LE(s.assignment.at(h), b.second);
    }
  }
}

TEST(ParamProperties, FullySatisfiedMeansAllDemosCorrect) {
  testing::Rng rng(104);
  auto s = parse_program("(if (> (dist_to q car) ??h1) (if (< (dist_to q person) ??h2) (leaf good) (leaf bad)) (leaf bad))");
  int full = 0;
  for (int i = 0; i < 60; ++i) {
    auto sc = std::make_shared<const scene::Scene>(testing::random_scene(rng));
    std::vector<Demonstration> demos;
    dsl::Assignment teacher{{"h1", testing::grid_value(rng, 0.0, 4.0)}, {"h2", testing::grid_value(rng, 1.0, 6.0)}};
    for (int k = 0; k < 4; ++k) {
      scene::Cell q{testing::uniform_int(rng, 0, sc->height - 1), testing::uniform_int(rng, 0, sc->width - 1)};
      demos.push_back(params::make_demonstration(sc, {{q, dsl::evaluate_with_holes(s, teacher, *sc, q, lib())}}, "x"));
    }
    auto out = params::param_synth(s, demos, lib(), dsl::LabelSet::binary(), perception());
    if (out.solve.satisfied_weight != out.solve.total_weight) continue;
    ++full;
    for (const auto& d : demos) {
      ASSERT_EQ(dsl::evaluate(out.program, *d.scene, d.queries[0].cell, lib()), d.queries[0].label);
    }
  }
  EXPECT_EQ(full, 60);
}

}  // namespace
}  // namespace prefprog
