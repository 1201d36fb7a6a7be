#pragma once

#include <filesystem>
#include <regex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "prefprog/synthesis/lm_provider.hpp"

namespace prefprog::synthesis {

inline constexpr int kScriptedTableFormat = 1;

// Deterministic provider driven by a mapping table (see
// data/scripted_lm.json): phrase patterns for labels, entities and
// predicates, expansion rules that turn predicates into thresholded
// comparisons with named holes, and default predicate definitions.
//
// Sketches it produces are decision chains, one branch per non-fallback
// label, whose guard is the disjunction of every condition seen for that
// label, sorted by printed form. Merging is therefore a set union and does
// not depend on the order explanations arrive in.
class ScriptedLmProvider : public LmProvider {
 public:
  explicit ScriptedLmProvider(nlohmann::json table);
  static ScriptedLmProvider from_file(const std::filesystem::path& path);

  nlohmann::json complete(const std::string& template_id, const nlohmann::json& context) const override;
  const LmConfig& config() const override { return config_; }

 private:
  struct Match {
    std::size_t position;
    std::string predicate;
    std::vector<std::string> entities;
    bool negated;
  };

  std::vector<std::pair<std::string, std::string>> aliases(const nlohmann::json& library) const;
  std::vector<std::string> entities_in(const std::string& text, const nlohmann::json& library) const;
  std::vector<Match> predicate_matches(const std::string& text, const nlohmann::json& library) const;
  nlohmann::json label_of(const std::string& text, const nlohmann::json& labels) const;
  nlohmann::json cnf_of(const std::string& text, const nlohmann::json& library) const;
  nlohmann::json expansions_of(const nlohmann::json& clauses) const;
  // Returns the merged chain as (rules, fallback).
  nlohmann::json merge(const nlohmann::json& rules, const std::string& fallback, const nlohmann::json& clauses,
                       const std::string& label, const nlohmann::json& labels) const;

  nlohmann::json table_;
  LmConfig config_;
};

// Normalized explanation text: lower case, punctuation other than commas and
// apostrophes replaced by spaces, whitespace collapsed.
std::string normalize_text(std::string_view text);

}  // namespace prefprog::synthesis
