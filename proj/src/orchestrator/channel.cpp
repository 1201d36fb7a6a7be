#include "prefprog/orchestrator/channel.hpp"

#include <sstream>

#include "prefprog/error.hpp"

namespace prefprog::orchestrator {

using nlohmann::json;

std::string_view query_kind_name(QueryKind kind) {
  return kind == QueryKind::kDemonstration ? "request-for-demonstration" : "request-for-explanation";
}

std::string_view query_status_name(QueryStatus status) {
  switch (status) {
    case QueryStatus::kOpen: return "open";
    case QueryStatus::kAnswered: return "answered";
    case QueryStatus::kClosed: return "closed";
  }
  return "open";
}

json query_to_json(const UserQuery& q) {
  return {{"id", q.id},
          {"predicate", q.predicate},
          {"kind", query_kind_name(q.kind)},
          {"status", query_status_name(q.status)},
          {"prompt", q.prompt}};
}

UserQuery query_from_json(const json& doc) {
  UserQuery q;
  q.id = doc.at("id").get<std::string>();
  q.predicate = doc.at("predicate").get<std::string>();
  q.kind = doc.at("kind").get<std::string>() == query_kind_name(QueryKind::kDemonstration) ? QueryKind::kDemonstration
                                                                                           : QueryKind::kExplanation;
  auto status = doc.at("status").get<std::string>();
  q.status = status == "answered" ? QueryStatus::kAnswered
             : status == "closed" ? QueryStatus::kClosed
                                  : QueryStatus::kOpen;
  q.prompt = doc.value("prompt", "");
  return q;
}

json answer_to_json(const UserAnswer& a) {
  switch (a.kind) {
    case UserAnswer::Kind::kDone: return {{"done", true}};
    case UserAnswer::Kind::kExplanation: return {{"explanation", a.explanation}};
    case UserAnswer::Kind::kDemonstration: return {{"demonstration", params::demo_to_json(*a.demonstration)}};
  }
  return {{"done", true}};
}

UserAnswer answer_from_json(const json& doc) {
  if (!doc.is_object()) throw Error(ErrorCode::kSchema, "answer must be an object");
  if (doc.value("done", false)) return UserAnswer::done();
  if (doc.contains("demonstration")) return UserAnswer::demonstrate(params::demo_from_json(doc["demonstration"]));
  if (doc.contains("explanation") && doc["explanation"].is_string()) {
    return UserAnswer::explain(doc["explanation"].get<std::string>());
  }
  throw Error(ErrorCode::kSchema, "answer needs one of 'done', 'explanation', 'demonstration'");
}

ScriptedChannel::ScriptedChannel(std::vector<UserAnswer> transcript) : transcript_(std::move(transcript)) {}

UserAnswer ScriptedChannel::ask(const UserQuery& query) {
  if (asked_.size() >= transcript_.size()) {
    throw Error(ErrorCode::kChannel, "scripted transcript exhausted at query " + query.id);
  }
  asked_.push_back(query);
  return transcript_[asked_.size() - 1];
}

UserAnswer GlossaryChannel::ask(const UserQuery& query) {
  ++calls_;
  auto it = glossary_.find(query.predicate);
  if (query.kind != QueryKind::kExplanation || it == glossary_.end()) return UserAnswer::done();
  return UserAnswer::explain(it->second);
}

UserAnswer ReplayChannel::ask(const UserQuery& query) {
  if (auto it = answers_.find(query.id); it != answers_.end()) return it->second;
  pending_ = query;
  throw Error(ErrorCode::kAwaitingUser, "waiting for the user to answer query " + query.id);
}

void ReplayChannel::record(const std::string& query_id, UserAnswer answer) {
  answers_[query_id] = std::move(answer);
  if (pending_ && pending_->id == query_id) pending_.reset();
}

void ReplayChannel::clear() {
  answers_.clear();
  pending_.reset();
}

StdioChannel::StdioChannel(std::istream& in, std::ostream& out, std::shared_ptr<const scene::Scene> scene)
    : in_(in), out_(out), scene_(std::move(scene)) {}

UserAnswer StdioChannel::ask(const UserQuery& query) {
  out_ << "[" << query.id << "] " << query.prompt << "\n> " << std::flush;
  std::string line;
  if (!std::getline(in_, line)) throw Error(ErrorCode::kChannel, "input closed while waiting for " + query.id);
  if (line.empty() || line == "done") return UserAnswer::done();
  if (query.kind == QueryKind::kExplanation) return UserAnswer::explain(line);
  if (!scene_) throw Error(ErrorCode::kChannel, "no scene available for demonstration answers");
  std::istringstream ss(line);
  int row = 0;
  int col = 0;
  std::string label;
  if (!(ss >> row >> col >> label)) {
    throw Error(ErrorCode::kChannel, "expected '<row> <col> <true|false> <explanation>'");
  }
  std::string text;
  std::getline(ss >> std::ws, text);
  if (text.empty()) text = label;
  return UserAnswer::demonstrate(params::make_demonstration(scene_, {{{row, col}, label}}, text));
}

}  // namespace prefprog::orchestrator
