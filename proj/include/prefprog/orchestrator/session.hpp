#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "prefprog/dsl/program.hpp"
#include "prefprog/library/concept_library.hpp"
#include "prefprog/orchestrator/channel.hpp"
#include "prefprog/params/demonstration.hpp"
#include "prefprog/params/solver.hpp"
#include "prefprog/scene/perception.hpp"
#include "prefprog/synthesis/lm_provider.hpp"
#include "prefprog/synthesis/synthesis.hpp"

namespace prefprog::orchestrator {

struct LearningSession {
  std::string id;
  dsl::LabelSet labels;
  std::vector<params::Demonstration> demos;
  std::optional<dsl::Sketch> sketch;
  std::optional<dsl::Program> program;
  library::ConceptLibrary library;
  std::vector<UserQuery> pending_queries;
  std::optional<params::SolveResult> solve;  // of the last param_synth run

  bool operator==(const LearningSession&) const = default;
};

LearningSession new_session(std::string id, dsl::LabelSet labels = dsl::LabelSet::binary(),
                            library::ConceptLibrary lib = {});

// How auxiliary predicates are learned. kExplanationOnly asks once for a
// description and takes the provider's definition with its default
// thresholds; kDemonstrations asks for labeled examples until the user says
// done and solves for the definition.
enum class AuxMode { kExplanationOnly, kDemonstrations };

struct LearnOptions {
  synthesis::SynthMode mode = synthesis::SynthMode::kTwoStage;
  AuxMode aux_mode = AuxMode::kExplanationOnly;
  std::map<std::string, AuxMode, std::less<>> aux_mode_overrides;
  int max_depth = 3;
  int max_queries = 5;  // per predicate
  params::SolverOptions solver;
  // Timestamp stamped on learned concepts; defaults to the current UTC time.
  std::function<std::string()> clock;
};

struct Learner {
  const synthesis::LmProvider& provider;
  const scene::PerceptionProvider& perception;
  UserChannel* channel = nullptr;  // without one, unknown predicates are errors
  LearnOptions options = {};
};

// One incremental step: grow the library from the explanation, update the
// sketch, then re-solve holes over every demonstration so far. The input
// session is never modified; any error leaves the caller with the old one.
LearningSession learn(const LearningSession& session, const params::Demonstration& demo, const Learner& learner);

// learn() over each demonstration in turn.
LearningSession learn_all(LearningSession session, const std::vector<params::Demonstration>& demos,
                          const Learner& learner);

// Adds the explanation's entities, then learns each predicate it mentions
// that the library lacks, asking the learner's channel.
library::ConceptLibrary update_concept_library(std::string_view explanation, const library::ConceptLibrary& lib,
                                               const Learner& learner);

// Learns (or re-learns, as a new version) one auxiliary predicate.
library::ConceptLibrary learn_predicate(const synthesis::PredicateMention& mention,
                                        const library::ConceptLibrary& lib, const Learner& learner,
                                        AuxMode mode);

inline constexpr int kSessionFormatVersion = 1;

// Layout: demos/NNN.json, sketch.pref, program.pref, library/, and
// session.json holding metadata plus a SHA-256 of every artifact file.
void save_session(const LearningSession& session, const std::filesystem::path& dir);
// Throws kDigestMismatch when an artifact is missing or altered.
LearningSession load_session(const std::filesystem::path& dir);

std::string utc_timestamp();

}  // namespace prefprog::orchestrator
