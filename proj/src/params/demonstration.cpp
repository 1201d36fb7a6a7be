#include "prefprog/params/demonstration.hpp"

#include "prefprog/digest.hpp"
#include "prefprog/error.hpp"

namespace prefprog::params {

bool Demonstration::operator==(const Demonstration& other) const {
  bool same_scene = scene == other.scene || (scene && other.scene && *scene == *other.scene);
  return id == other.id && same_scene && queries == other.queries && explanation == other.explanation;
}

namespace {

nlohmann::ordered_json queries_to_json(const std::vector<LabeledQuery>& queries) {
  auto out = nlohmann::ordered_json::array();
  for (const auto& q : queries) out.push_back({{"cell", {q.cell.row, q.cell.col}}, {"label", q.label}});
  return out;
}

}  // namespace

Demonstration make_demonstration(std::shared_ptr<const scene::Scene> scene, std::vector<LabeledQuery> queries,
                                 std::string explanation, std::string id) {
  if (!scene) throw Error(ErrorCode::kSchema, "demonstration without a scene");
  if (id.empty()) {
    nlohmann::ordered_json content = {{"scene", scene::scene_to_json(*scene)},
                                      {"queries", queries_to_json(queries)},
                                      {"explanation", explanation}};
    id = "d-" + sha256_hex(content.dump()).substr(0, 12);
  }
  return Demonstration{std::move(id), std::move(scene), std::move(queries), std::move(explanation)};
}

void validate(const Demonstration& demo, const dsl::LabelSet& labels) {
  if (!demo.scene) throw Error(ErrorCode::kSchema, "demonstration '" + demo.id + "' has no scene");
  if (demo.queries.empty()) throw Error(ErrorCode::kSchema, "demonstration '" + demo.id + "' has no queries");
  if (demo.explanation.empty()) {
    throw Error(ErrorCode::kSchema, "demonstration '" + demo.id + "' has an empty explanation");
  }
  for (const auto& q : demo.queries) {
    if (!labels.contains(q.label)) {
      throw Error(ErrorCode::kUnknownLabel, "label '" + q.label + "' is not in the label set");
    }
    if (!demo.scene->in_bounds(q.cell)) {
      throw Error(ErrorCode::kOutOfBounds, "query (" + std::to_string(q.cell.row) + "," +
                                               std::to_string(q.cell.col) + ") outside scene '" +
                                               demo.scene->id + "'");
    }
  }
}

nlohmann::ordered_json demo_to_json(const Demonstration& demo) {
  return {{"id", demo.id},
          {"explanation", demo.explanation},
          {"queries", queries_to_json(demo.queries)},
          {"scene", scene::scene_to_json(*demo.scene)}};
}

Demonstration demo_from_json(const nlohmann::json& doc) {
  try {
    std::vector<LabeledQuery> queries;
    for (const auto& q : doc.at("queries")) {
      const auto& cell = q.at("cell");
      if (!cell.is_array() || cell.size() != 2) throw Error(ErrorCode::kSchema, "queries[].cell must be [row, col]");
      queries.push_back({{cell[0].get<int>(), cell[1].get<int>()}, q.at("label").get<std::string>()});
    }
    auto scene = std::make_shared<const scene::Scene>(scene::scene_from_json(doc.at("scene")));
    return make_demonstration(std::move(scene), std::move(queries), doc.at("explanation").get<std::string>(),
                              doc.value("id", std::string()));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchema, std::string("demonstration: ") + e.what());
  }
}

}  // namespace prefprog::params
