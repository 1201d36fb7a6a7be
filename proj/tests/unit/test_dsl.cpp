#include <gtest/gtest.h>

#include <cmath>

#include "prefprog/dsl/evaluator.hpp"
#include "prefprog/dsl/syntax.hpp"
#include "prefprog/error.hpp"
#include "prefprog/scene/scene.hpp"
#include "support/generators.hpp"

namespace prefprog {
namespace {

using dsl::LabelSet;
using dsl::parse_program;
using dsl::print_program;

constexpr const char* kRunningExample =
    "(if (and (is_on q sidewalk) (is_far q person) (is_far q car) (not (in_way q))) (leaf good) (leaf bad))";
constexpr const char* kThreshold = "(if (> (dist_to q car) ??h1) (leaf good) (leaf bad))";

scene::Scene campus() { return scene::load_scene(std::string(PREFPROG_FIXTURE_DIR) + "/campus_01.json"); }

TEST(Parse, MinimalLeaf) {
  auto s = parse_program("(leaf good)");
  EXPECT_EQ(s, dsl::Sketch{dsl::leaf("good")});
  EXPECT_EQ(print_program(s), "(leaf good)");
}

TEST(Parse, RunningExampleShape) {
  auto s = parse_program(kRunningExample);
  const auto& b = std::get<dsl::Branch>(s.root->node);
  const auto& conj = std::get<dsl::And>(b.cond->node);
  ASSERT_EQ(conj.args.size(), 4u);
  EXPECT_EQ(std::get<dsl::Atom>(conj.args[0]->node).head, "is_on");
  EXPECT_TRUE(std::holds_alternative<dsl::Not>(conj.args[3]->node));
  EXPECT_EQ(dsl::leaf_labels(s), (std::vector<std::string>{"good", "bad"}));
}

TEST(Parse, ThresholdSketchHasOneHole) {
  auto s = parse_program(kThreshold);
  EXPECT_EQ(dsl::free_holes(s), (std::set<std::string>{"h1"}));
}

TEST(Parse, SyntaxErrorCarriesPosition) {
  try {
    parse_program("(if (> q 1)\n  (leaf good)");
    FAIL() << "expected a syntax error";
  } catch (const SyntaxError& e) {
    EXPECT_EQ(e.line(), 2);
    EXPECT_GT(e.column(), 0);
  }
}

TEST(Parse, UnknownLabelRejected) {
  try {
    parse_program("(leaf maybe)");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownLabel);
  }
}

TEST(Parse, HoleBoundsAndComments) {
  auto s = parse_program("; threshold\n(if (> (dist_to q car) ??h1[0.5,9]) (leaf good) (leaf bad))");
  auto bounds = dsl::hole_bounds(s);
  EXPECT_DOUBLE_EQ(bounds.at("h1").first, 0.5);
  EXPECT_DOUBLE_EQ(bounds.at("h1").second, 9.0);
  EXPECT_EQ(parse_program(print_program(s)), s);
}

TEST(Print, CanonicalLayout) {
  auto s = parse_program(kThreshold);
  EXPECT_EQ(print_program(s), "(if (> (dist_to q car) ??h1)\n  (leaf good)\n  (leaf bad))");
  EXPECT_EQ(print_program(parse_program(print_program(s))), print_program(s));
}

TEST(Holes, SetNotMultiset) {
  auto s = parse_program("(if (and (> (dist_to q car) ??h1) (< (dist_to q person) ??h1)) (leaf good) (leaf bad))");
  EXPECT_EQ(dsl::free_holes(s).size(), 1u);
  EXPECT_TRUE(dsl::free_holes(parse_program("(leaf good)")).empty());
}

TEST(Substitute, FillsHoles) {
  auto s = parse_program(kThreshold);
  auto filled = dsl::substitute(s, {{"h1", 3.0}});
  EXPECT_TRUE(dsl::free_holes(filled).empty());
  EXPECT_EQ(print_program(filled), "(if (> (dist_to q car) 3.0)\n  (leaf good)\n  (leaf bad))");
  auto two = parse_program("(if (and (> (dist_to q car) ??a) (> (dist_to q person) ??b)) (leaf good) (leaf bad))");
  EXPECT_EQ(dsl::free_holes(dsl::substitute(two, {{"a", 1.0}})), (std::set<std::string>{"b"}));
  EXPECT_EQ(dsl::substitute(parse_program("(leaf good)"), {}), parse_program("(leaf good)"));
}

TEST(Substitute, OutOfBoundsRejected) {
  auto s = parse_program("(if (> (dist_to q car) ??h1[0,5]) (leaf good) (leaf bad))");
  try {
    dsl::substitute(s, {{"h1", 6.0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kHoleBounds);
  }
}

TEST(Program, RequiresHoleFree) {
  try {
    dsl::Program::from_sketch(parse_program(kThreshold));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnboundHole);
  }
}

TEST(Evaluate, LeafIsConstant) {
  auto sc = campus();
  auto p = dsl::Program::from_sketch(parse_program("(leaf good)"));
  EXPECT_EQ(dsl::evaluate(p, sc, {4, 4}, library::ConceptLibrary()), "good");
}

// Hand computation on campus_01: the car occupies (1,0) and (1,1).
// From (1,6) the nearest car cell is (1,1): 5 cells, 5.0 m.
// From (2,2) the nearest is (1,1): sqrt(2) = 1.41 m.
TEST(Evaluate, ThresholdProgram) {
  auto sc = campus();
  auto lib = testing::concept_fixture_library();
  auto p = dsl::Program::from_sketch(dsl::substitute(parse_program(kThreshold), {{"h1", 3.0}}));
  EXPECT_EQ(dsl::evaluate(p, sc, {1, 6}, lib), "good");
  EXPECT_EQ(dsl::evaluate(p, sc, {2, 2}, lib), "bad");
}

TEST(Evaluate, RunningExampleOnSidewalk) {
  auto sc = campus();
  auto lib = testing::concept_fixture_library();
  auto p = dsl::Program::from_sketch(parse_program(kRunningExample));
  // (6,3): sidewalk, car at (1,1) is sqrt(25+4)=5.39 m, person at (6,6) is 3 m -> not far.
  EXPECT_EQ(dsl::evaluate(p, sc, {6, 3}, lib), "bad");
  // (6,2): person 4 m, car sqrt(25+1)=5.10 m, sidewalk, not on the path row.
  EXPECT_EQ(dsl::evaluate(p, sc, {6, 2}, lib), "good");
  // (3,4): on the path row.
  EXPECT_EQ(dsl::evaluate(p, sc, {3, 4}, lib), "bad");
}

TEST(Evaluate, UnresolvedAndArityErrors) {
  auto sc = campus();
  library::ConceptLibrary lib;
  auto unknown = dsl::Program::from_sketch(parse_program("(if (is_near q car) (leaf good) (leaf bad))"));
  try {
    dsl::evaluate(unknown, sc, {0, 0}, lib);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnresolvedName);
  }
  auto arity = dsl::Program::from_sketch(parse_program("(if (is_on q) (leaf good) (leaf bad))"));
  try {
    dsl::evaluate(arity, sc, {0, 0}, lib);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kArityMismatch);
  }
  auto nonbool = dsl::Program::from_sketch(parse_program("(if (dist_to q car) (leaf good) (leaf bad))"));
  try {
    dsl::evaluate(nonbool, sc, {0, 0}, lib);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTypeError);
  }
}

TEST(Evaluate, EqualityTolerance) {
  auto sc = campus();
  library::ConceptLibrary lib;
  auto p = dsl::Program::from_sketch(parse_program("(if (= (+ 0.1 0.2) 0.3) (leaf good) (leaf bad))"));
  EXPECT_EQ(dsl::evaluate(p, sc, {0, 0}, lib), "good");
}

TEST(EvaluateMask, LeafCoversGrid) {
  auto sc = campus();
  auto p = dsl::Program::from_sketch(parse_program("(leaf good)"));
  auto m = dsl::evaluate_mask(p, sc, library::ConceptLibrary());
  EXPECT_EQ(m.labels.size(), 64u);
  EXPECT_EQ(std::count(m.labels.begin(), m.labels.end(), "good"), 64);
}

TEST(EvaluateMask, MatchesPointwiseLoop) {
  auto sc = campus();
  auto lib = testing::concept_fixture_library();
  auto p = dsl::Program::from_sketch(dsl::substitute(parse_program(kThreshold), {{"h1", 3.0}}));
  for (bool cache : {false, true}) {
    for (int threads : {1, 3}) {
      auto m = dsl::evaluate_mask(p, sc, lib, dsl::default_perception(), {cache, threads});
      for (int r = 0; r < sc.height; ++r) {
        for (int c = 0; c < sc.width; ++c) EXPECT_EQ(m.at({r, c}), dsl::evaluate(p, sc, {r, c}, lib));
      }
    }
  }
}

// Set-algebra oracle straight from the fixture annotations.
TEST(EvaluateMask, RunningExampleMatchesAnnotations) {
  auto sc = campus();
  auto lib = testing::concept_fixture_library();
  auto p = dsl::Program::from_sketch(parse_program(kRunningExample));
  auto m = dsl::evaluate_mask(p, sc, lib);
  auto nearest = [&](int r, int c, const std::vector<std::pair<int, int>>& cells) {
    double best = 1e18;
    for (auto [er, ec] : cells) best = std::min(best, std::hypot(er - r, ec - c));
    return best;
  };
  int good = 0;
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 8; ++c) {
      bool sidewalk = c >= 2 && c <= 5 && r != 3;
      bool want = sidewalk && nearest(r, c, {{6, 6}}) > 3.0 && nearest(r, c, {{1, 0}, {1, 1}}) > 3.0;
      EXPECT_EQ(m.at({r, c}), want ? "good" : "bad") << r << "," << c;
      good += want;
    }
  }
  EXPECT_GT(good, 0);
}

TEST(Properties, RoundTripRandomSketches) {
  testing::Rng rng(11);
  for (int i = 0; i < 300; ++i) {
    auto s = testing::random_sketch(rng);
    auto text = print_program(s);
    auto back = parse_program(text);
    ASSERT_EQ(back, s) << text;
    ASSERT_EQ(print_program(back), text);
  }
}

TEST(Properties, SubstituteCommutesWithEvaluation) {
  testing::Rng rng(12);
  auto lib = testing::concept_fixture_library();
  for (int i = 0; i < 300; ++i) {
    auto sc = testing::random_scene(rng, 3, 8, 1.0);
    auto s = testing::random_sketch(rng);
    auto a = testing::random_assignment(rng, {"h1", "h2", "h3"});
    auto p = dsl::Program::from_sketch(dsl::substitute(s, a));
    scene::Cell q{testing::uniform_int(rng, 0, sc.height - 1), testing::uniform_int(rng, 0, sc.width - 1)};
    ASSERT_EQ(dsl::evaluate(p, sc, q, lib), dsl::evaluate_with_holes(s, a, sc, q, lib)) << print_program(s);
  }
}

TEST(Properties, TotalDeterministicAndMaskAgreement) {
  testing::Rng rng(13);
  auto lib = testing::concept_fixture_library();
  for (int i = 0; i < 60; ++i) {
    auto sc = testing::random_scene(rng, 3, 8, 1.0);
    auto p = dsl::Program::from_sketch(
        dsl::substitute(testing::random_sketch(rng), testing::random_assignment(rng, {"h1", "h2", "h3"})));
    auto m1 = dsl::evaluate_mask(p, sc, lib);
    auto m2 = dsl::evaluate_mask(p, sc, lib, dsl::default_perception(), {false, 2});
    ASSERT_EQ(m1, m2);
    for (int r = 0; r < sc.height; ++r) {
      for (int c = 0; c < sc.width; ++c) {
        auto label = dsl::evaluate(p, sc, {r, c}, lib);
        ASSERT_TRUE(label == "good" || label == "bad");
        ASSERT_EQ(m1.at({r, c}), label);
      }
    }
  }
}

}  // namespace
}  // namespace prefprog
