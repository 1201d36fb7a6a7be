#include <gtest/gtest.h>

#include <filesystem>

#include <httplib.h>

#include "prefprog/api/server.hpp"
#include "prefprog/dsl/evaluator.hpp"
#include "prefprog/dsl/syntax.hpp"
#include "prefprog/orchestrator/session.hpp"
#include "prefprog/synthesis/scripted_lm.hpp"

namespace prefprog {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const char* kRunning =
    "Good place to stop since it sits on the sidewalk, away from the person and the car, and is not in the way.";

const synthesis::ScriptedLmProvider& lm() {
  static auto p = synthesis::ScriptedLmProvider::from_file(std::string(PREFPROG_DATA_DIR) + "/scripted_lm.json");
  return p;
}

json seeded_session_body(const std::string& id) {
  return {{"id", id},
          {"entities", {"sidewalk", "road", "grass", "path", "car", "person"}},
          {"concepts",
           {{{"name", "is_far"},
             {"params", {{{"name", "q"}, {"kind", "query"}}, {{"name", "e"}, {"kind", "entity"}}}},
             {"body", "(if (> (dist_to q e) 3.0) (leaf true) (leaf false))"}},
            {{"name", "in_way"},
             {"params", {{{"name", "q"}, {"kind", "query"}}}},
             {"body", "(if (in_region q path) (leaf true) (leaf false))"}}}}};
}

json running_demo() {
  return {{"scene_id", "campus_01"}, {"queries", {{{"cell", {7, 3}}, {"label", "good"}}}}, {"explanation", kRunning}};
}

class ApiTest : public ::testing::Test {
 protected:
  void SetUp() override { start({}); }

  void start(std::optional<fs::path> sessions_dir) {
    server_.reset();
    api::ServerConfig config;
    config.port = 0;
    config.scenes_dir = PREFPROG_FIXTURE_DIR;
    config.sessions_dir = sessions_dir;
    server_ = std::make_unique<api::ApiServer>(lm(), dsl::default_perception(), config);
    port_ = server_->start();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }

  std::pair<int, json> post(const std::string& path, const json& body, const httplib::Headers& headers = {}) {
    auto res = client_->Post(path, headers, body.dump(), "application/json");
    if (!res) return {0, nullptr};
    return {res->status, res->body.empty() ? json() : json::parse(res->body)};
  }

  std::pair<int, json> get(const std::string& path) {
    auto res = client_->Get(path);
    if (!res) return {0, nullptr};
    return {res->status, json::parse(res->body)};
  }

  std::unique_ptr<api::ApiServer> server_;
  std::unique_ptr<httplib::Client> client_;
  int port_ = 0;
};

TEST_F(ApiTest, RunningExampleOnSeededSession) {
  auto [created, view] = post("/sessions", seeded_session_body("s1"));
  ASSERT_EQ(created, 201) << view;
  EXPECT_EQ(view["demo_count"], 0);
  EXPECT_TRUE(view["program"].is_null());

  auto [status, body] = post("/sessions/s1/demonstrations", running_demo());
  ASSERT_EQ(status, 200) << body;
  auto program = body["program"].get<std::string>();
  EXPECT_NE(program.find("is_on"), std::string::npos);
  EXPECT_NE(program.find("dist_to q person"), std::string::npos);
  EXPECT_TRUE(body["pending_queries"].empty());

  auto [vs, v] = get("/sessions/s1");
  EXPECT_EQ(vs, 200);
  EXPECT_EQ(v["demo_count"], 1);
  EXPECT_EQ(v["program"], program);
  auto [ps, p] = get("/sessions/s1/program");
  EXPECT_EQ(ps, 200);
  EXPECT_EQ(p["program"], program);
}

TEST_F(ApiTest, EvaluateMatchesInProcessMask) {
  post("/sessions", seeded_session_body("s1"));
  ASSERT_EQ(post("/sessions/s1/demonstrations", running_demo()).first, 200);
  auto [status, body] = post("/sessions/s1/evaluate", {{"scene_id", "campus_01"}});
  ASSERT_EQ(status, 200) << body;

  auto lib = library::ConceptLibrary();
  for (const auto& e : {"sidewalk", "road", "grass", "path", "car", "person"}) lib = lib.add_entity(e);
  auto seeded_view = get("/sessions/s1").second;
  auto program = dsl::Program::from_sketch(dsl::parse_program(seeded_view["program"].get<std::string>()));
  // Rebuild the library from the session view to evaluate in process.
  for (const auto& c : seeded_view["library"]["concepts"]) {
    std::vector<library::Param> params;
    for (const auto& p : c["params"]) params.push_back({p["name"], library::kind_from_name(p["kind"].get<std::string>())});
    lib = lib.add_predicate({.name = c["name"],
                             .params = params,
                             .body = dsl::Program::from_sketch(
                                 dsl::parse_program(c["body"].get<std::string>(), dsl::LabelSet::boolean()))});
  }
  auto scene = scene::load_scene(std::string(PREFPROG_FIXTURE_DIR) + "/campus_01.json");
  auto mask = dsl::evaluate_mask(program, scene, lib, dsl::default_perception());
  EXPECT_EQ(body["labels"].get<std::vector<std::string>>(), mask.labels);
  EXPECT_EQ(body["width"], mask.width);
}

TEST_F(ApiTest, EvaluateWithoutProgramIsConflict) {
  post("/sessions", seeded_session_body("s1"));
  EXPECT_EQ(post("/sessions/s1/evaluate", {{"scene_id", "campus_01"}}).first, 409);
}

TEST_F(ApiTest, QueryAnswerFlowFromEmptyLibrary) {
  ASSERT_EQ(post("/sessions", {{"id", "fresh"}}).first, 201);
  auto [s1, b1] = post("/sessions/fresh/demonstrations", running_demo());
  ASSERT_EQ(s1, 202) << b1;
  ASSERT_EQ(b1["pending_queries"].size(), 1u);
  auto q1 = b1["pending_queries"][0];
  EXPECT_EQ(q1["id"], "is_far-1");
  EXPECT_EQ(q1["kind"], "request-for-explanation");
  EXPECT_EQ(q1["status"], "open");

  // A second demonstration must wait for the open query.
  EXPECT_EQ(post("/sessions/fresh/demonstrations", running_demo()).first, 409);

  auto [s2, b2] = post("/sessions/fresh/queries/is_far-1/answer", {{"explanation", "more than a few meters away"}});
  ASSERT_EQ(s2, 202) << b2;
  EXPECT_EQ(b2["pending_queries"][0]["id"], "in_way-1");

  auto [s3, b3] = post("/sessions/fresh/queries/in_way-1/answer", {{"explanation", "blocking the path"}});
  ASSERT_EQ(s3, 200) << b3;
  EXPECT_FALSE(b3["program"].get<std::string>().empty());

  auto [qs, qb] = get("/sessions/fresh/queries");
  EXPECT_EQ(qs, 200);
  EXPECT_EQ(qb["queries"].size(), 2u);
  EXPECT_TRUE(qb["pending_queries"].empty());
  for (const auto& q : qb["queries"]) EXPECT_EQ(q["status"], "answered");

  auto view = get("/sessions/fresh").second;
  EXPECT_EQ(view["demo_count"], 1);
  std::vector<std::string> names;
  for (const auto& c : view["library"]["concepts"]) names.push_back(c["name"]);
  EXPECT_NE(std::find(names.begin(), names.end(), "is_far"), names.end());
  EXPECT_NE(std::find(names.begin(), names.end(), "in_way"), names.end());

  // Answering a query that is no longer open conflicts.
  EXPECT_EQ(post("/sessions/fresh/queries/is_far-1/answer", {{"explanation", "x"}}).first, 409);
}

TEST_F(ApiTest, DoneAnswerAbortsPendingDemonstration) {
  post("/sessions", {{"id", "fresh"}});
  ASSERT_EQ(post("/sessions/fresh/demonstrations", running_demo()).first, 202);
  auto [status, body] = post("/sessions/fresh/queries/is_far-1/answer", {{"done", true}});
  EXPECT_EQ(status, 422) << body;
  EXPECT_EQ(body["error"]["code"], error_code_name(ErrorCode::kUnresolvedPredicate));
  auto view = get("/sessions/fresh").second;
  EXPECT_EQ(view["demo_count"], 0);
  EXPECT_TRUE(view["pending_queries"].empty());
  EXPECT_EQ(post("/sessions/fresh/queries/is_far-1/answer", {{"done", true}}).first, 409);
  // The session accepts new demonstrations again.
  EXPECT_EQ(post("/sessions/fresh/demonstrations", running_demo()).first, 202);
}

TEST_F(ApiTest, IdempotencyKeyReplaysReply) {
  post("/sessions", seeded_session_body("s1"));
  httplib::Headers key{{"Idempotency-Key", "abc"}};
  auto first = post("/sessions/s1/demonstrations", running_demo(), key);
  auto second = post("/sessions/s1/demonstrations", running_demo(), key);
  ASSERT_EQ(first.first, 200);
  EXPECT_EQ(first, second);
  EXPECT_EQ(get("/sessions/s1").second["demo_count"], 1);
  post("/sessions/s1/demonstrations", running_demo());
  EXPECT_EQ(get("/sessions/s1").second["demo_count"], 2);
}

TEST_F(ApiTest, ClientErrors) {
  EXPECT_EQ(get("/sessions/nope").first, 404);
  EXPECT_EQ(post("/sessions/nope/demonstrations", running_demo()).first, 404);
  ASSERT_EQ(post("/sessions", seeded_session_body("s1")).first, 201);
  EXPECT_EQ(post("/sessions", seeded_session_body("s1")).first, 409);

  auto res = client_->Post("/sessions/s1/demonstrations", "{not json", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);

  auto bad_label = running_demo();
  bad_label["queries"][0]["label"] = "meh";
  auto [s1, b1] = post("/sessions/s1/demonstrations", bad_label);
  EXPECT_EQ(s1, 400);
  EXPECT_EQ(b1["error"]["code"], error_code_name(ErrorCode::kUnknownLabel));

  auto outside = running_demo();
  outside["queries"][0]["cell"] = {40, 0};
  EXPECT_EQ(post("/sessions/s1/demonstrations", outside).first, 400);

  auto missing = running_demo();
  missing.erase("queries");
  EXPECT_EQ(post("/sessions/s1/demonstrations", missing).first, 400);

  auto unknown_scene = running_demo();
  unknown_scene["scene_id"] = "mars";
  EXPECT_EQ(post("/sessions/s1/demonstrations", unknown_scene).first, 404);
  EXPECT_EQ(post("/sessions/s1/queries/zzz-1/answer", {{"done", true}}).first, 404);
  EXPECT_EQ(get("/sessions/s1").second["demo_count"], 0);
}

TEST_F(ApiTest, ScenesSpecAndCors) {
  auto [ls, list] = get("/scenes");
  EXPECT_EQ(ls, 200);
  ASSERT_EQ(list["scenes"].size(), 1u);
  EXPECT_EQ(list["scenes"][0]["id"], "campus_01");
  EXPECT_EQ(get("/scenes/campus_01").second["width"], 8);
  EXPECT_EQ(get("/scenes/none").first, 404);

  auto [ss, spec] = get("/spec");
  EXPECT_EQ(ss, 200);
  EXPECT_TRUE(spec["paths"].contains("/sessions/{id}/queries/{qid}/answer"));

  auto res = client_->Options("/sessions");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 204);
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");
}

TEST_F(ApiTest, SessionsSurviveRestart) {
  auto dir = fs::temp_directory_path() / ("prefprog_api_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  start(dir);
  post("/sessions", seeded_session_body("keep"));
  auto learned = post("/sessions/keep/demonstrations", running_demo()).second;
  start(dir);
  auto view = get("/sessions/keep").second;
  EXPECT_EQ(view["demo_count"], 1);
  EXPECT_EQ(view["program"], learned["program"]);
  fs::remove_all(dir);
}

TEST(ApiStatus, ErrorMapping) {
  EXPECT_EQ(api::http_status(ErrorCode::kSchema), 400);
  EXPECT_EQ(api::http_status(ErrorCode::kOutOfBounds), 400);
  EXPECT_EQ(api::http_status(ErrorCode::kUnresolvedPredicate), 422);
  EXPECT_EQ(api::http_status(ErrorCode::kContractViolation), 422);
  EXPECT_EQ(api::http_status(ErrorCode::kIo), 500);
}

}  // namespace
}  // namespace prefprog
