// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit status if
// any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "prefprog/dsl/evaluator.hpp"
#include "prefprog/dsl/syntax.hpp"
#include "prefprog/eval/dataset.hpp"
#include "prefprog/eval/metrics.hpp"
#include "prefprog/eval/reorder.hpp"
#include "prefprog/eval/synthetic.hpp"
#include "prefprog/orchestrator/session.hpp"
#include "prefprog/params/partial_eval.hpp"
#include "prefprog/params/solver.hpp"
#include "prefprog/synthesis/scripted_lm.hpp"
#include "support/generators.hpp"

namespace prefprog {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

const synthesis::ScriptedLmProvider& lm() {
  static auto p = synthesis::ScriptedLmProvider::from_file(std::string(PREFPROG_DATA_DIR) + "/scripted_lm.json");
  return p;
}

const scene::PerceptionProvider& perception() { return dsl::default_perception(); }

orchestrator::Learner learner(orchestrator::UserChannel* channel,
                              orchestrator::AuxMode mode = orchestrator::AuxMode::kExplanationOnly) {
  orchestrator::LearnOptions options;
  options.aux_mode = mode;
  return {lm(), perception(), channel, options};
}

Outcome solver_optimality() {
  testing::Rng rng(1001);
  auto start = Clock::now();
  int mismatches = 0;
  for (int i = 0; i < 500; ++i) {
    auto wf = testing::random_formula(rng, 3, 40);
    if (params::solve_maxsmt(wf).satisfied_weight != params::brute_force_oracle(wf).satisfied_weight) ++mismatches;
  }
  double secs = seconds_since(start);
  return {mismatches == 0 && secs < 60.0, fmt("500 instances, %d weight mismatches, %.2f s (limit 60 s)", mismatches, secs)};
}

Outcome partial_eval_soundness() {
  testing::Rng rng(1002);
  auto lib = testing::concept_fixture_library();
  int agree = 0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    // Folding evaluates both sides of a hole-dependent branch, so scenes
    // carry depth for any depth atom the sketch may contain.
    auto sc = std::make_shared<const scene::Scene>(testing::random_scene(rng, 3, 10, 1.0));
    auto sketch = testing::random_sketch(rng);
    scene::Cell q{testing::uniform_int(rng, 0, sc->height - 1), testing::uniform_int(rng, 0, sc->width - 1)};
    auto demo = params::make_demonstration(sc, {{q, "good"}}, "probe");
    auto a = testing::random_assignment(rng, {"h1", "h2", "h3"});
    auto direct = dsl::evaluate(dsl::Program::from_sketch(dsl::substitute(sketch, a)), *sc, q, lib, perception());
    auto residual = params::partial_eval(sketch, demo, 0, lib, perception());
    agree += params::evaluate_residual(residual.sketch, a) == direct;
  }
  return {agree == n, fmt("%d/%d triples agree", agree, n)};
}

Outcome guard_partition() {
  testing::Rng rng(1003);
  testing::SketchGen g;
  g.scene_atoms = false;
  int violations = 0;
  for (int i = 0; i < 1000; ++i) {
    g.labels = testing::coin(rng) ? std::vector<std::string>{"good", "bad"}
                                  : std::vector<std::string>{"good", "ok", "bad"};
    auto rs = testing::random_sketch(rng, g);
    auto a = testing::random_assignment(rng, g.holes);
    int hits = 0;
    for (const auto& l : g.labels) hits += params::evaluate_residual_condition(*params::guard_formula(rs, l), a);
    violations += hits != 1;
  }
  return {violations == 0, fmt("1000 residual sketches, %d violations", violations)};
}

struct TeacherRun {
  double miou = 0.0;
  double in_miou = 0.0;
  double out_miou = 0.0;
  double seconds = 0.0;
  std::vector<std::string> unsat_demos;
  std::vector<std::string> mislabeled;
  std::string program;
};

TeacherRun teacher_run(int noisy) {
  eval::ExperimentConfig cfg;
  cfg.seed = 2024;
  cfg.demos = 29;
  cfg.in_test = 25;
  cfg.out_test = 25;
  cfg.noisy = noisy;
  auto start = Clock::now();
  auto ex = eval::generate_experiment(cfg);
  orchestrator::GlossaryChannel channel(eval::auxiliary_explanations());
  auto session = orchestrator::learn_all(orchestrator::new_session("teacher"), ex.demos, learner(&channel));
  auto held_out = ex.dataset.only({eval::Split::kInTest, eval::Split::kOutTest});
  auto report = eval::evaluate_dataset(*session.program, held_out, session.library, perception());
  TeacherRun r;
  r.seconds = seconds_since(start);
  r.miou = report.overall().miou;
  r.in_miou = report.split(eval::Split::kInTest).mean.miou;
  r.out_miou = report.split(eval::Split::kOutTest).mean.miou;
  r.unsat_demos = session.solve->unsat_demos();
  r.mislabeled = ex.mislabeled;
  r.program = dsl::print_program(session.program->sketch());
  return r;
}

Outcome hidden_teacher(const TeacherRun& r) {
  bool pass = r.miou >= 95.0 && r.seconds < 300.0;
  return {pass, fmt("held-out mIOU %.2f (in %.2f, out %.2f; need >= 95), %.2f s (limit 300 s)", r.miou, r.in_miou,
                    r.out_miou, r.seconds)};
}

Outcome noise_tolerance(const TeacherRun& clean, const TeacherRun& noisy) {
  bool exact = noisy.unsat_demos == noisy.mislabeled;
  double drop = clean.miou - noisy.miou;
  return {exact && drop <= 2.0,
          fmt("unsat demos %s the %zu mislabeled (%zu reported), mIOU %.2f vs %.2f, drop %.2f (limit 2)",
              exact ? "match" : "differ from", noisy.mislabeled.size(), noisy.unsat_demos.size(), noisy.miou,
              clean.miou, drop)};
}

Outcome reordering() {
  eval::ExperimentConfig cfg;
  cfg.seed = 77;
  cfg.demos = 20;
  cfg.in_test = 15;
  cfg.out_test = 15;
  auto ex = eval::generate_experiment(cfg);
  orchestrator::GlossaryChannel channel(eval::auxiliary_explanations());
  auto l = learner(&channel);
  // Auxiliary concepts are settled up front so every ordering starts from the
  // same library.
  auto initial = orchestrator::new_session("reorder");
  for (const auto& d : ex.demos) initial.library = orchestrator::update_concept_library(d.explanation, initial.library, l);
  eval::ReorderOptions opts;
  opts.permutations = 10;
  opts.seed = 5;
  auto bands = eval::reorder_study(initial, ex.demos, ex.dataset.only({eval::Split::kInTest, eval::Split::kOutTest}), l,
                                   opts);
  const int n = cfg.demos;
  bool flat = bands[n].width() == 0.0;
  bool monotone = true;
  std::string widths;
  for (int k = n - 7; k <= n; ++k) {
    if (k > n - 7 && bands[k].width() > bands[k - 1].width()) monotone = false;
    widths += fmt("%s%.2f", widths.empty() ? "" : " ", bands[k].width());
  }
  return {flat && monotone, fmt("width at prefix 1 %.2f, at prefix %d %.4f; last 8 widths [%s]%s", bands[1].width(), n,
                                bands[n].width(), widths.c_str(), monotone ? "" : " not non-increasing")};
}

Outcome runtime_budget() {
  testing::Rng rng(1007);
  auto sc = testing::random_scene(rng, 64, 64, 0.0);
  auto program = dsl::Program::from_sketch(dsl::parse_program(
      "(if (and (is_on q sidewalk) (> (dist_to q person) 2.0) (> (dist_to q car) 3.0) (not (in_region q path)))"
      " (if (or (< (dist_to q person) 9.0) (> (dist_to q car) 12.0) (is_on q grass)) (leaf good) (leaf bad))"
      " (if (and (> (dist_to q person) 1.0) (< (dist_to q car) 20.0) (not (is_on q road))) (leaf good) (leaf bad)))"));
  library::ConceptLibrary lib;
  auto time_mask = [&](bool cache) {
    double best = 1e9;
    for (int i = 0; i < 3; ++i) {
      auto start = Clock::now();
      auto mask = dsl::evaluate_mask(program, sc, lib, perception(), {cache, 1});
      best = std::min(best, seconds_since(start));
      if (mask.labels.size() != sc.cell_count()) return -1.0;
    }
    return best;
  };
  double cached = time_mask(true);
  double uncached = time_mask(false);
  double speedup = uncached / std::max(cached, 1e-9);
  bool pass = cached >= 0 && uncached >= 0 && cached <= 1.0 && speedup >= 5.0;
  return {pass, fmt("64x64, 10 atoms: %.4f s cached (limit 1 s), %.4f s uncached, speedup %.1fx (need >= 5)", cached,
                    uncached, speedup)};
}

Outcome metric_arithmetic() {
  scene::Mask gt(4, 4), pred(4, 4);
  for (scene::Cell c : {scene::Cell{0, 0}, {0, 1}, {1, 0}, {1, 1}}) gt.set(c);
  pred.set({0, 0});
  pred.set({0, 1});
  auto e = eval::compute_iou(pred, gt);
  bool example = std::abs(e.iou_pos - 50.00) <= 0.01 && std::abs(e.iou_neg - 85.71) <= 0.01 &&
                 std::abs(e.miou - 67.86) <= 0.01;
  scene::Mask inv(4, 4);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      if (!gt.test({r, c})) inv.set({r, c});
    }
  }
  auto same = eval::compute_iou(gt, gt);
  auto comp = eval::compute_iou(inv, gt);
  bool exact = same.iou_pos == 100.0 && same.iou_neg == 100.0 && same.miou == 100.0 && comp.iou_pos == 0.0 &&
               comp.iou_neg == 0.0 && comp.miou == 0.0;
  return {example && exact, fmt("example %.2f/%.2f/%.2f, identity %.0f, complement %.0f", e.iou_pos, e.iou_neg, e.miou,
                                same.miou, comp.miou)};
}

Outcome interaction() {
  auto campus =
      std::make_shared<const scene::Scene>(scene::load_scene(std::string(PREFPROG_FIXTURE_DIR) + "/campus_01.json"));
  auto demo = [&](scene::Cell c, const char* label, const char* text) {
    return params::make_demonstration(campus, {{c, label}}, text);
  };
  using orchestrator::UserAnswer;
  std::vector<UserAnswer> transcript = {
      UserAnswer::demonstrate(demo({0, 3}, "true", "true, the person is way over there")),
      UserAnswer::demonstrate(demo({5, 5}, "false", "false, the person is right there")),
      UserAnswer::done(),
      UserAnswer::demonstrate(demo({3, 3}, "true", "counts, it is on the path")),
      UserAnswer::demonstrate(demo({2, 3}, "false", "does not count, it is on the sidewalk")),
      UserAnswer::done(),
  };
  orchestrator::ScriptedChannel channel(transcript);
  auto running = demo({7, 3}, "good",
                      "Good place to stop since it sits on the sidewalk, away from the person and the car, and is "
                      "not in the way.");
  try {
    auto s = orchestrator::learn(orchestrator::new_session("interaction"), running,
                                 learner(&channel, orchestrator::AuxMode::kDemonstrations));
    bool has_all = s.library.contains("is_on") && s.library.contains("is_far") && s.library.contains("in_way");
    bool calls = channel.calls() == static_cast<int>(transcript.size());
    bool correct = dsl::evaluate(*s.program, *campus, {7, 3}, s.library, perception()) == "good";
    return {has_all && calls && correct,
            fmt("library %s is_on/is_far/in_way, %d channel calls for a %zu-entry transcript, demo %s",
                has_all ? "has" : "lacks", channel.calls(), transcript.size(), correct ? "classified" : "misclassified")};
  } catch (const std::exception& e) {
    return {false, std::string("learn failed: ") + e.what()};
  }
}

}  // namespace
}  // namespace prefprog

int main() {
  using namespace prefprog;
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& run) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("criterion %d %-28s %s  %s\n", id, name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  };
  report(1, "solver-optimality", solver_optimality);
  report(2, "partial-eval-soundness", partial_eval_soundness);
  report(3, "guard-partition", guard_partition);
  TeacherRun clean, noisy;
  report(4, "hidden-teacher-recovery", [&] {
    clean = teacher_run(0);
    return hidden_teacher(clean);
  });
  report(5, "noise-tolerance", [&] {
    noisy = teacher_run(2);
    return noise_tolerance(clean, noisy);
  });
  report(6, "reordering-study", reordering);
  report(7, "runtime-budget", runtime_budget);
  report(8, "metric-arithmetic", metric_arithmetic);
  report(9, "concept-library-interaction", interaction);
  std::printf("%d of 9 criteria passed\n", 9 - failures);
  return failures == 0 ? 0 : 1;
}
