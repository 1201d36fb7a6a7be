#pragma once

#include <deque>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "prefprog/library/concept_library.hpp"
#include "prefprog/params/demonstration.hpp"

namespace prefprog::orchestrator {

enum class QueryKind { kDemonstration, kExplanation };
enum class QueryStatus { kOpen, kAnswered, kClosed };

std::string_view query_kind_name(QueryKind kind);
std::string_view query_status_name(QueryStatus status);

// A request to the user about an auxiliary predicate. Ids are
// "<predicate>-<n>", numbered per predicate within one learn call, so a
// replayed learn asks the same questions under the same ids.
struct UserQuery {
  std::string id;
  std::string predicate;
  QueryKind kind = QueryKind::kExplanation;
  QueryStatus status = QueryStatus::kOpen;
  std::string prompt;

  bool operator==(const UserQuery&) const = default;
};

struct UserAnswer {
  enum class Kind { kExplanation, kDemonstration, kDone };
  Kind kind = Kind::kDone;
  std::string explanation;
  std::optional<params::Demonstration> demonstration;

  static UserAnswer done() { return {}; }
  static UserAnswer explain(std::string text) { return {Kind::kExplanation, std::move(text), std::nullopt}; }
  static UserAnswer demonstrate(params::Demonstration d) {
    return {Kind::kDemonstration, d.explanation, std::move(d)};
  }
};

nlohmann::json query_to_json(const UserQuery& q);
UserQuery query_from_json(const nlohmann::json& doc);
nlohmann::json answer_to_json(const UserAnswer& a);
UserAnswer answer_from_json(const nlohmann::json& doc);

class UserChannel {
 public:
  virtual ~UserChannel() = default;
  virtual UserAnswer ask(const UserQuery& query) = 0;
};

// Answers from a fixed transcript, in order. Running past the end throws
// Error(kChannel).
class ScriptedChannel : public UserChannel {
 public:
  explicit ScriptedChannel(std::vector<UserAnswer> transcript);
  UserAnswer ask(const UserQuery& query) override;

  int calls() const { return static_cast<int>(asked_.size()); }
  std::size_t transcript_size() const { return transcript_.size(); }
  const std::vector<UserQuery>& asked() const { return asked_; }

 private:
  std::vector<UserAnswer> transcript_;
  std::vector<UserQuery> asked_;
};

// Answers explanation queries from a fixed glossary and declines everything
// else, for unattended batch runs.
class GlossaryChannel : public UserChannel {
 public:
  explicit GlossaryChannel(std::map<std::string, std::string> glossary) : glossary_(std::move(glossary)) {}
  UserAnswer ask(const UserQuery& query) override;
  int calls() const { return calls_; }

 private:
  std::map<std::string, std::string> glossary_;
  int calls_ = 0;
};

// Pull-based channel for the HTTP layer. Answers are recorded per query id;
// asking a query without a recorded answer remembers it as pending and throws
// Error(kAwaitingUser), aborting the learn call. Once the answer arrives the
// learn call is replayed from the start.
class ReplayChannel : public UserChannel {
 public:
  UserAnswer ask(const UserQuery& query) override;

  void record(const std::string& query_id, UserAnswer answer);
  const std::optional<UserQuery>& pending() const { return pending_; }
  void clear();

 private:
  std::map<std::string, UserAnswer> answers_;
  std::optional<UserQuery> pending_;
};

// Terminal channel. Explanation queries read one line ("done" or an empty
// line ends). Demonstration queries read "<row> <col> <true|false> <text>"
// for a cell of the channel's scene.
class StdioChannel : public UserChannel {
 public:
  StdioChannel(std::istream& in, std::ostream& out, std::shared_ptr<const scene::Scene> scene = nullptr);
  UserAnswer ask(const UserQuery& query) override;

 private:
  std::istream& in_;
  std::ostream& out_;
  std::shared_ptr<const scene::Scene> scene_;
};

}  // namespace prefprog::orchestrator
