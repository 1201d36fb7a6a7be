#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prefprog/dsl/program.hpp"
#include "prefprog/params/formula.hpp"

namespace prefprog::params {

inline constexpr double kCandidateEpsilon = 1e-3;

struct SolveResult {
  dsl::Assignment assignment;
  int satisfied_weight = 0;
  int total_weight = 0;
  std::vector<std::string> unsat_origins;  // sorted
  bool optimal = true;  // false when the greedy search was used

  bool operator==(const SolveResult&) const = default;

  // Distinct demo ids among unsat_origins, sorted.
  std::vector<std::string> unsat_demos() const;
};

struct SolverOptions {
  double epsilon = kCandidateEpsilon;
  int exhaustive_max_holes = 3;
  int restarts = 10;
  std::uint64_t seed = 0;
};

// Maximizes satisfied clause weight. Every atom must compare a hole-linear
// expression in a single hole against a constant (Error(kUnsupportedAtom)
// otherwise). Among maximizers, the satisfied-clause set that is
// lexicographically greatest in origin order wins; then each hole, in name
// order, takes the midpoint of the widest interval that keeps that set.
SolveResult solve_maxsmt(const WeightedFormula& wf, const SolverOptions& options = {});

// Exhaustive search over per-hole candidate values (atom constants, midpoints
// between them, and epsilon beyond the extremes). Throws
// Error(kTooManyHoles) above three holes.
SolveResult brute_force_oracle(const WeightedFormula& wf, double epsilon = kCandidateEpsilon);

struct SynthResult {
  dsl::Program program;
  SolveResult solve;
  WeightedFormula formula;
};

SynthResult param_synth(const dsl::Sketch& sketch, const std::vector<Demonstration>& demos,
                        const library::ConceptLibrary& lib, const dsl::LabelSet& labels,
                        const scene::PerceptionProvider& provider, const SolverOptions& options = {});

}  // namespace prefprog::params
