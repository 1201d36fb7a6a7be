#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prefprog/eval/dataset.hpp"
#include "prefprog/orchestrator/session.hpp"

namespace prefprog::eval {

// mIOU spread across demonstration orders after the first `prefix` demos.
// Prefix 0 has no program and carries no numbers.
struct PrefixBand {
  int prefix = 0;
  bool has_program = false;
  double min = 0.0;
  double mean = 0.0;
  double max = 0.0;

  double width() const { return max - min; }
};

struct ReorderOptions {
  int permutations = 10;
  std::uint64_t seed = 0;
  EvalOptions eval;
};

// Learns each of `permutations` shuffles of `demos` incrementally from
// `initial`, scoring the program after every prefix on `heldout` (mean
// per-scene mIOU). Returns prefixes 0..demos.size().
std::vector<PrefixBand> reorder_study(const orchestrator::LearningSession& initial,
                                      const std::vector<params::Demonstration>& demos, const LabeledDataset& heldout,
                                      const orchestrator::Learner& learner, const ReorderOptions& options = {});

// prefix,min,mean,max,width; prefix 0 is written as "0,no-program,,,".
std::string bands_csv(const std::vector<PrefixBand>& bands);

}  // namespace prefprog::eval
