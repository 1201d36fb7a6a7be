#include "prefprog/eval/reorder.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <random>

namespace prefprog::eval {

std::vector<PrefixBand> reorder_study(const orchestrator::LearningSession& initial,
                                      const std::vector<params::Demonstration>& demos, const LabeledDataset& heldout,
                                      const orchestrator::Learner& learner, const ReorderOptions& options) {
  const std::size_t n = demos.size();
  std::vector<std::vector<double>> scores(n + 1);
  std::mt19937_64 rng(options.seed);
  auto order = demos;
  for (int p = 0; p < options.permutations; ++p) {
    std::shuffle(order.begin(), order.end(), rng);
    auto session = initial;
    for (std::size_t k = 1; k <= n; ++k) {
      session = orchestrator::learn(session, order[k - 1], learner);
      auto report = evaluate_dataset(*session.program, heldout, session.library, learner.perception, options.eval);
      scores[k].push_back(report.overall().miou);
    }
  }
  std::vector<PrefixBand> bands;
  bands.push_back({0, false, 0.0, 0.0, 0.0});
  for (std::size_t k = 1; k <= n; ++k) {
    PrefixBand b;
    b.prefix = static_cast<int>(k);
    b.has_program = true;
    b.min = *std::min_element(scores[k].begin(), scores[k].end());
    b.max = *std::max_element(scores[k].begin(), scores[k].end());
    double sum = 0.0;
    for (double s : scores[k]) sum += s;
    b.mean = sum / static_cast<double>(scores[k].size());
    bands.push_back(b);
  }
  return bands;
}

std::string bands_csv(const std::vector<PrefixBand>& bands) {
  std::string out = "prefix,min,mean,max,width\n";
  char buf[128];
  for (const auto& b : bands) {
    if (!b.has_program) {
      std::snprintf(buf, sizeof buf, "%d,no-program,,,\n", b.prefix);
    } else {
      std::snprintf(buf, sizeof buf, "%d,%.4f,%.4f,%.4f,%.4f\n", b.prefix, b.min, b.mean, b.max, b.width());
    }
    out += buf;
  }
  return out;
}

}  // namespace prefprog::eval
