#include "prefprog/api/server.hpp"

#include <atomic>
#include <chrono>
#include <future>
#include <map>
#include <mutex>
#include <thread>

#include <httplib.h>

#include "prefprog/dsl/evaluator.hpp"
#include "prefprog/dsl/syntax.hpp"
#include "prefprog/orchestrator/session.hpp"

namespace prefprog::api {

namespace fs = std::filesystem;
using nlohmann::json;
using orchestrator::LearningSession;
using orchestrator::QueryStatus;
using orchestrator::UserQuery;

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kSchema:
    case ErrorCode::kSyntax:
    case ErrorCode::kUnknownLabel:
    case ErrorCode::kOutOfBounds:
    case ErrorCode::kNameCollision:
    case ErrorCode::kVersionFormat:
      return 400;
    case ErrorCode::kIo:
    case ErrorCode::kDigestMismatch:
      return 500;
    case ErrorCode::kProviderFailure:
      return 502;
    default:
      return 422;
  }
}

json error_body(ErrorCode code, const std::string& message) {
  return {{"error", {{"code", error_code_name(code)}, {"message", message}}}};
}

namespace {

json params_json(const std::vector<library::Param>& params) {
  json out = json::array();
  for (const auto& p : params) out.push_back({{"name", p.name}, {"kind", library::kind_name(p.kind)}});
  return out;
}

std::vector<library::Param> params_from(const json& doc) {
  std::vector<library::Param> out;
  for (const auto& p : doc) out.push_back({p.at("name").get<std::string>(), library::kind_from_name(p.at("kind").get<std::string>())});
  return out;
}

json library_json(const library::ConceptLibrary& lib) {
  json concepts = json::array();
  for (const auto& name : lib.topological_order()) {
    const auto& c = lib.lookup_predicate(name);
    concepts.push_back({{"name", c.name},
                        {"version", c.version},
                        {"params", params_json(c.params)},
                        {"body", dsl::print_program(c.body.sketch())},
                        {"provenance", c.provenance},
                        {"depends_on", c.depends_on}});
  }
  return {{"entities", lib.entities()}, {"concepts", concepts}};
}

json solve_json(const std::optional<params::SolveResult>& solve) {
  if (!solve) return nullptr;
  return {{"assignment", solve->assignment},
          {"satisfied_weight", solve->satisfied_weight},
          {"total_weight", solve->total_weight},
          {"unsat_origins", solve->unsat_origins},
          {"optimal", solve->optimal}};
}

json open_queries(const std::vector<UserQuery>& queries) {
  json out = json::array();
  for (const auto& q : queries) {
    if (q.status == QueryStatus::kOpen) out.push_back(orchestrator::query_to_json(q));
  }
  return out;
}

std::string program_text(const LearningSession& s) {
  return s.program ? dsl::print_program(s.program->sketch()) : std::string();
}

struct Slot {
  std::mutex mutex;
  LearningSession session;
  orchestrator::ReplayChannel channel;
  std::optional<params::Demonstration> pending_demo;
  std::vector<UserQuery> queries;  // every query asked, latest last
  std::map<std::string, std::pair<int, json>> replies;  // by idempotency key
};

json session_view(const Slot& slot) {
  const auto& s = slot.session;
  return {{"id", s.id},
          {"labels", s.labels.labels()},
          {"demo_count", s.demos.size()},
          {"pending_queries", open_queries(slot.queries)},
          {"program", s.program ? json(program_text(s)) : json(nullptr)},
          {"sketch", s.sketch ? json(dsl::print_program(*s.sketch)) : json(nullptr)},
          {"library", library_json(s.library)},
          {"solve", solve_json(s.solve)}};
}

struct NotFound : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Attempt {
  enum class Kind { kOk, kAwaiting, kError, kTimeout } kind = Kind::kError;
  LearningSession session;
  std::optional<UserQuery> pending;
  ErrorCode code = ErrorCode::kIo;
  std::string message;
};

}  // namespace

struct ApiServer::Impl {
  const synthesis::LmProvider& provider;
  const scene::PerceptionProvider& perception;
  ServerConfig config;
  httplib::Server server;
  std::thread thread;
  int port = -1;

  std::mutex registry_mutex;
  std::map<std::string, std::shared_ptr<Slot>> sessions;
  std::map<std::string, std::shared_ptr<const scene::Scene>> scenes;
  int next_id = 1;

  Impl(const synthesis::LmProvider& p, const scene::PerceptionProvider& per, ServerConfig cfg)
      : provider(p), perception(per), config(std::move(cfg)) {
    load_state();
    routes();
  }

  void load_state() {
    if (!config.scenes_dir.empty() && fs::is_directory(config.scenes_dir)) {
      for (const auto& entry : fs::directory_iterator(config.scenes_dir)) {
        if (entry.path().extension() != ".json") continue;
        auto s = std::make_shared<const scene::Scene>(scene::load_scene(entry.path()));
        scenes[s->id] = s;
      }
    }
    if (config.sessions_dir && fs::is_directory(*config.sessions_dir)) {
      for (const auto& entry : fs::directory_iterator(*config.sessions_dir)) {
        if (!fs::exists(entry.path() / "session.json")) continue;
        auto slot = std::make_shared<Slot>();
        slot->session = orchestrator::load_session(entry.path());
        slot->queries = slot->session.pending_queries;
        // A demonstration left waiting by a previous process is not restored.
        for (auto& q : slot->queries) q.status = QueryStatus::kClosed;
        slot->session.pending_queries.clear();
        sessions[slot->session.id] = slot;
      }
    }
  }

  void persist(const Slot& slot) {
    if (config.sessions_dir) orchestrator::save_session(slot.session, *config.sessions_dir / slot.session.id);
  }

  static void send(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void send_error(httplib::Response& res, ErrorCode code, const std::string& message) {
    send(res, http_status(code), error_body(code, message));
  }

  static json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return json::object();
    try {
      auto doc = json::parse(req.body);
      if (!doc.is_object()) throw Error(ErrorCode::kSchema, "request body must be a JSON object");
      return doc;
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::kSchema, std::string("malformed JSON: ") + e.what());
    }
  }

  std::shared_ptr<Slot> find_session(const std::string& id) {
    std::lock_guard lock(registry_mutex);
    auto it = sessions.find(id);
    return it == sessions.end() ? nullptr : it->second;
  }

  std::shared_ptr<const scene::Scene> scene_from(const json& doc) {
    if (doc.contains("scene") && doc["scene"].is_object()) {
      return std::make_shared<const scene::Scene>(scene::scene_from_json(doc["scene"]));
    }
    if (!doc.contains("scene_id") || !doc["scene_id"].is_string()) {
      throw Error(ErrorCode::kSchema, "expected 'scene_id' or an inline 'scene'");
    }
    auto id = doc["scene_id"].get<std::string>();
    std::lock_guard lock(registry_mutex);
    auto it = scenes.find(id);
    if (it == scenes.end()) throw NotFound("unknown scene '" + id + "'");
    return it->second;
  }

  params::Demonstration demo_from(const json& doc, const dsl::LabelSet& labels) {
    try {
      auto sc = scene_from(doc);
      std::vector<params::LabeledQuery> queries;
      for (const auto& q : doc.at("queries")) {
        queries.push_back({{q.at("cell").at(0).get<int>(), q.at("cell").at(1).get<int>()}, q.at("label").get<std::string>()});
      }
      auto d = params::make_demonstration(sc, std::move(queries), doc.at("explanation").get<std::string>(),
                                          doc.value("id", ""));
      params::validate(d, labels);
      return d;
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kSchema, std::string("malformed demonstration: ") + e.what());
    }
  }

  Attempt run_learn(const LearningSession& session, const params::Demonstration& demo,
                    orchestrator::ReplayChannel channel) {
    auto task = std::make_shared<std::packaged_task<Attempt()>>(
        [this, session, demo, channel]() mutable {
          Attempt a;
          orchestrator::Learner learner{provider, perception, &channel};
          try {
            a.session = orchestrator::learn(session, demo, learner);
            a.kind = Attempt::Kind::kOk;
          } catch (const Error& e) {
            a.code = e.code();
            a.message = e.what();
            if (e.code() == ErrorCode::kAwaitingUser && channel.pending()) {
              a.kind = Attempt::Kind::kAwaiting;
              a.pending = channel.pending();
            }
          } catch (const std::exception& e) {
            a.message = e.what();
          }
          return a;
        });
    auto result = task->get_future();
    std::thread([task] { (*task)(); }).detach();
    auto limit = std::chrono::duration<double>(config.learn_timeout_seconds);
    if (result.wait_for(limit) == std::future_status::timeout) {
      Attempt a;
      a.kind = Attempt::Kind::kTimeout;
      a.message = "learning did not finish within the time limit";
      return a;
    }
    return result.get();
  }

  // Applies the outcome of a learn attempt to the slot and writes the reply.
  void settle(Slot& slot, const params::Demonstration& demo, Attempt attempt, httplib::Response& res) {
    switch (attempt.kind) {
      case Attempt::Kind::kOk: {
        slot.session = std::move(attempt.session);
        slot.session.pending_queries.clear();
        slot.pending_demo.reset();
        slot.channel.clear();
        persist(slot);
        send(res, 200,
             {{"status", "learned"},
              {"demo_id", demo.id},
              {"program", program_text(slot.session)},
              {"sketch", dsl::print_program(*slot.session.sketch)},
              {"pending_queries", json::array()},
              {"solve", solve_json(slot.session.solve)}});
        return;
      }
      case Attempt::Kind::kAwaiting: {
        slot.pending_demo = demo;
        auto q = *attempt.pending;
        q.status = QueryStatus::kOpen;
        slot.queries.push_back(q);
        slot.session.pending_queries = {q};
        persist(slot);
        send(res, 202, {{"status", "awaiting-user"}, {"demo_id", demo.id}, {"pending_queries", open_queries(slot.queries)}});
        return;
      }
      case Attempt::Kind::kError:
      case Attempt::Kind::kTimeout: {
        slot.pending_demo.reset();
        slot.channel.clear();
        for (auto& q : slot.queries) {
          if (q.status == QueryStatus::kOpen) q.status = QueryStatus::kClosed;
        }
        slot.session.pending_queries.clear();
        if (attempt.kind == Attempt::Kind::kTimeout) {
          send(res, 504, {{"error", {{"code", "timeout"}, {"message", attempt.message}}}});
        } else {
          send_error(res, attempt.code, attempt.message);
        }
        return;
      }
    }
  }

  void routes() {
    server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const Error& e) {
        send_error(res, e.code(), e.what());
      } catch (const NotFound& e) {
        send(res, 404, error_body(ErrorCode::kUnresolvedName, e.what()));
      } catch (const std::exception& e) {
        send(res, 500, {{"error", {{"code", "internal"}, {"message", e.what()}}}});
      }
    });
    server.set_post_routing_handler([this](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Origin", config.cors_origin);
      res.set_header("Access-Control-Allow-Headers", "Content-Type, Idempotency-Key");
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    });
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Get("/spec", [](const httplib::Request&, httplib::Response& res) { send(res, 200, openapi_document()); });

    server.Get("/scenes", [this](const httplib::Request&, httplib::Response& res) {
      json list = json::array();
      std::lock_guard lock(registry_mutex);
      for (const auto& [id, s] : scenes) list.push_back({{"id", id}, {"width", s->width}, {"height", s->height}});
      send(res, 200, {{"scenes", list}});
    });

    server.Get("/scenes/:id", [this](const httplib::Request& req, httplib::Response& res) {
      std::lock_guard lock(registry_mutex);
      auto it = scenes.find(req.path_params.at("id"));
      if (it == scenes.end()) return send(res, 404, error_body(ErrorCode::kUnresolvedName, "unknown scene"));
      send(res, 200, json(scene::scene_to_json(*it->second)));
    });

    server.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      auto body = parse_body(req);
      auto slot = std::make_shared<Slot>();
      try {
        dsl::LabelSet labels = body.contains("labels")
                                   ? dsl::LabelSet(body["labels"].get<std::vector<std::string>>())
                                   : dsl::LabelSet::binary();
        library::ConceptLibrary lib;
        for (const auto& e : body.value("entities", json::array())) lib = lib.add_entity(library::normalize_name(e.get<std::string>()));
        for (const auto& c : body.value("concepts", json::array())) {
          auto sketch = dsl::parse_program(c.at("body").get<std::string>(), dsl::LabelSet::boolean());
          lib = lib.add_predicate(library::PredicateConcept{c.at("name").get<std::string>(), params_from(c.at("params")),
                                                            dsl::Program::from_sketch(sketch), {}, 0,
                                                            orchestrator::utc_timestamp(), {}});
        }
        slot->session = orchestrator::new_session("", labels, lib);
      } catch (const json::exception& e) {
        throw Error(ErrorCode::kSchema, std::string("malformed session request: ") + e.what());
      }
      {
        std::lock_guard lock(registry_mutex);
        std::string id = body.value("id", "");
        if (id.empty()) {
          do {
            id = "session-" + std::to_string(next_id++);
          } while (sessions.count(id));
        } else if (sessions.count(id)) {
          return send(res, 409, error_body(ErrorCode::kNameCollision, "session '" + id + "' already exists"));
        }
        slot->session.id = id;
        sessions[id] = slot;
      }
      std::lock_guard lock(slot->mutex);
      persist(*slot);
      send(res, 201, session_view(*slot));
    });

    server.Get("/sessions/:id", [this](const httplib::Request& req, httplib::Response& res) {
      auto slot = find_session(req.path_params.at("id"));
      if (!slot) return send(res, 404, error_body(ErrorCode::kUnresolvedName, "unknown session"));
      std::lock_guard lock(slot->mutex);
      send(res, 200, session_view(*slot));
    });

    server.Get("/sessions/:id/program", [this](const httplib::Request& req, httplib::Response& res) {
      auto slot = find_session(req.path_params.at("id"));
      if (!slot) return send(res, 404, error_body(ErrorCode::kUnresolvedName, "unknown session"));
      std::lock_guard lock(slot->mutex);
      const auto& s = slot->session;
      send(res, 200,
           {{"program", s.program ? json(program_text(s)) : json(nullptr)},
            {"sketch", s.sketch ? json(dsl::print_program(*s.sketch)) : json(nullptr)}});
    });

    server.Get("/sessions/:id/queries", [this](const httplib::Request& req, httplib::Response& res) {
      auto slot = find_session(req.path_params.at("id"));
      if (!slot) return send(res, 404, error_body(ErrorCode::kUnresolvedName, "unknown session"));
      std::lock_guard lock(slot->mutex);
      json all = json::array();
      for (const auto& q : slot->queries) all.push_back(orchestrator::query_to_json(q));
      send(res, 200, {{"queries", all}, {"pending_queries", open_queries(slot->queries)}});
    });

    server.Post("/sessions/:id/demonstrations", [this](const httplib::Request& req, httplib::Response& res) {
      auto slot = find_session(req.path_params.at("id"));
      if (!slot) return send(res, 404, error_body(ErrorCode::kUnresolvedName, "unknown session"));
      std::lock_guard lock(slot->mutex);
      auto key = req.get_header_value("Idempotency-Key");
      if (!key.empty()) {
        if (auto it = slot->replies.find(key); it != slot->replies.end()) return send(res, it->second.first, it->second.second);
      }
      if (slot->pending_demo) {
        return send(res, 409, error_body(ErrorCode::kAwaitingUser, "answer the open queries before adding demonstrations"));
      }
      auto demo = demo_from(parse_body(req), slot->session.labels);
      slot->channel.clear();
      settle(*slot, demo, run_learn(slot->session, demo, slot->channel), res);
      if (!key.empty()) slot->replies[key] = {res.status, json::parse(res.body)};
    });

    server.Post("/sessions/:id/queries/:qid/answer", [this](const httplib::Request& req, httplib::Response& res) {
      auto slot = find_session(req.path_params.at("id"));
      if (!slot) return send(res, 404, error_body(ErrorCode::kUnresolvedName, "unknown session"));
      std::lock_guard lock(slot->mutex);
      const auto& qid = req.path_params.at("qid");
      UserQuery* query = nullptr;
      for (auto it = slot->queries.rbegin(); it != slot->queries.rend(); ++it) {
        if (it->id == qid) {
          query = &*it;
          break;
        }
      }
      if (!query) return send(res, 404, error_body(ErrorCode::kUnresolvedName, "unknown query '" + qid + "'"));
      if (query->status != QueryStatus::kOpen || !slot->pending_demo) {
        return send(res, 409, error_body(ErrorCode::kChannel, "query '" + qid + "' is not open"));
      }
      auto body = parse_body(req);
      orchestrator::UserAnswer answer;
      if (body.contains("demonstration")) {
        answer = orchestrator::UserAnswer::demonstrate(demo_from(body["demonstration"], dsl::LabelSet::boolean()));
      } else {
        answer = orchestrator::answer_from_json(body);
      }
      query->status = QueryStatus::kAnswered;
      slot->channel.record(qid, answer);
      auto demo = *slot->pending_demo;
      settle(*slot, demo, run_learn(slot->session, demo, slot->channel), res);
    });

    server.Post("/sessions/:id/evaluate", [this](const httplib::Request& req, httplib::Response& res) {
      auto slot = find_session(req.path_params.at("id"));
      if (!slot) return send(res, 404, error_body(ErrorCode::kUnresolvedName, "unknown session"));
      auto body = parse_body(req);
      std::optional<dsl::Program> program;
      library::ConceptLibrary lib;
      {
        std::lock_guard lock(slot->mutex);
        program = slot->session.program;
        lib = slot->session.library;
      }
      if (!program) return send(res, 409, error_body(ErrorCode::kUnboundHole, "session has no program yet"));
      auto sc = scene_from(body);
      auto mask = dsl::evaluate_mask(*program, *sc, lib, perception);
      std::map<std::string, int> counts;
      for (const auto& l : mask.labels) ++counts[l];
      send(res, 200,
           {{"scene_id", sc->id}, {"width", mask.width}, {"height", mask.height}, {"labels", mask.labels}, {"counts", counts}});
    });
  }
};

ApiServer::ApiServer(const synthesis::LmProvider& provider, const scene::PerceptionProvider& perception,
                     ServerConfig config)
    : impl_(std::make_unique<Impl>(provider, perception, std::move(config))) {}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind() {
  auto& s = impl_->server;
  impl_->port = impl_->config.port == 0 ? s.bind_to_any_port(impl_->config.host)
                                        : (s.bind_to_port(impl_->config.host, impl_->config.port) ? impl_->config.port : -1);
  if (impl_->port < 0) {
    throw Error(ErrorCode::kIo, "cannot bind " + impl_->config.host + ":" + std::to_string(impl_->config.port));
  }
  return impl_->port;
}

void ApiServer::listen() { impl_->server.listen_after_bind(); }

int ApiServer::start() {
  int port = bind();
  impl_->thread = std::thread([this] { listen(); });
  impl_->server.wait_until_ready();
  return port;
}

void ApiServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

json openapi_document() {
  auto op = [](const char* summary, json responses) { return json{{"summary", summary}, {"responses", responses}}; };
  json err = {{"description", "error"},
              {"content", {{"application/json", {{"schema", {{"$ref", "#/components/schemas/Error"}}}}}}}};
  return {
      {"openapi", "3.0.3"},
      {"info", {{"title", "prefprog API"}, {"version", "1.0.0"}}},
      {"paths",
       {{"/sessions", {{"post", op("Create a session", {{"201", {{"description", "session view"}}}, {"400", err}, {"409", err}})}}},
        {"/sessions/{id}", {{"get", op("Session view", {{"200", {{"description", "session view"}}}, {"404", err}})}}},
        {"/sessions/{id}/demonstrations",
         {{"post", op("Add a demonstration and relearn",
                      {{"200", {{"description", "learned"}}},
                       {"202", {{"description", "awaiting answers to auxiliary-concept queries"}}},
                       {"400", err},
                       {"404", err},
                       {"409", err},
                       {"422", err},
                       {"504", err}})}}},
        {"/sessions/{id}/queries", {{"get", op("Queries raised while learning", {{"200", {{"description", "queries"}}}, {"404", err}})}}},
        {"/sessions/{id}/queries/{qid}/answer",
         {{"post", op("Answer an open query ({explanation}, {demonstration} or {done: true})",
                      {{"200", {{"description", "learned"}}},
                       {"202", {{"description", "another query is open"}}},
                       {"400", err},
                       {"404", err},
                       {"409", err},
                       {"422", err}})}}},
        {"/sessions/{id}/program", {{"get", op("Current program text", {{"200", {{"description", "program"}}}, {"404", err}})}}},
        {"/sessions/{id}/evaluate",
         {{"post", op("Preference mask for a scene ({scene_id} or inline {scene})",
                      {{"200", {{"description", "mask"}}}, {"400", err}, {"404", err}, {"409", err}})}}},
        {"/scenes", {{"get", op("List scenes", {{"200", {{"description", "scene ids"}}}})}}},
        {"/scenes/{id}", {{"get", op("Scene document", {{"200", {{"description", "scene"}}}, {"404", err}})}}},
        {"/spec", {{"get", op("This document", {{"200", {{"description", "OpenAPI"}}}})}}}}},
      {"components",
       {{"schemas",
         {{"Error",
           {{"type", "object"},
            {"properties",
             {{"error",
               {{"type", "object"},
                {"properties", {{"code", {{"type", "string"}}}, {"message", {{"type", "string"}}}}}}}}}}}}}}}};
}

}  // namespace prefprog::api
