#include "prefprog/eval/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <optional>

#include "prefprog/dsl/evaluator.hpp"
#include "prefprog/dsl/syntax.hpp"
#include "prefprog/error.hpp"
#include "prefprog/io.hpp"

namespace prefprog::eval {

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using Rng = std::mt19937_64;

namespace {

const char* kTeacherSketch =
    "(if (and (is_on q sidewalk) (> (dist_to q person) ??t_person[0,50]) (> (dist_to q car) ??t_car[0,50])) "
    "(leaf good) (leaf bad))";

const char* kGoodText =
    "Good place to stop since it sits on the sidewalk, away from the person and the car, and is not in the way.";
const char* kNearPersonText = "Not good, it is not far from the person.";
const char* kNearCarText = "Bad, it is not far from the car.";
const char* kPathText = "Bad because it is in the way.";

int uniform(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

enum class Kind { kGood, kNearPerson, kNearCar, kOffSidewalk, kPath };

// Mix of demonstration kinds, cycled through.
constexpr Kind kCycle[] = {Kind::kGood, Kind::kNearPerson, Kind::kNearCar, Kind::kGood,       Kind::kOffSidewalk,
                           Kind::kGood, Kind::kNearPerson, Kind::kNearCar, Kind::kPath,       Kind::kGood};

struct CellFacts {
  scene::Cell cell;
  std::string terrain;
  double person = 0.0;
  double car = 0.0;
};

std::vector<CellFacts> facts(const scene::Scene& s) {
  scene::ScriptedPerception perception;
  auto persons = scene::ground_entity(s, "person", perception);
  auto cars = scene::ground_entity(s, "car", perception);
  std::vector<CellFacts> out;
  for (int r = 0; r < s.height; ++r) {
    for (int c = 0; c < s.width; ++c) {
      scene::Cell q{r, c};
      out.push_back({q, scene::terrain_at(s, q), scene::dist_to_mask(s, q, persons), scene::dist_to_mask(s, q, cars)});
    }
  }
  return out;
}

// Candidate cells of a kind; those within `band` meters of the deciding
// threshold come first when any exist.
std::optional<CellFacts> pick_cell(Rng& rng, const std::vector<CellFacts>& cells, Kind kind, double tp, double tc) {
  constexpr double band = 1.5;
  std::vector<CellFacts> near, all;
  for (const auto& f : cells) {
    bool sidewalk = f.terrain == "sidewalk";
    bool ok = false;
    bool close = false;
    switch (kind) {
      case Kind::kGood:
        ok = sidewalk && f.person > tp && f.car > tc;
        close = std::min(f.person - tp, f.car - tc) < band;
        break;
      case Kind::kNearPerson:
        ok = sidewalk && f.car > tc && f.person <= tp;
        close = f.person > tp - band;
        break;
      case Kind::kNearCar:
        ok = sidewalk && f.person > tp && f.car <= tc;
        close = f.car > tc - band;
        break;
      case Kind::kOffSidewalk: ok = f.terrain == "road" || f.terrain == "grass"; break;
      case Kind::kPath: ok = f.terrain == "path"; break;
    }
    if (!ok) continue;
    all.push_back(f);
    if (close) near.push_back(f);
  }
  const auto& pool = near.empty() ? all : near;
  if (pool.empty()) return std::nullopt;
  return pool[static_cast<std::size_t>(uniform(rng, 0, static_cast<int>(pool.size()) - 1))];
}

std::string explanation_for(Kind kind, const CellFacts& f) {
  switch (kind) {
    case Kind::kGood: return kGoodText;
    case Kind::kNearPerson: return kNearPersonText;
    case Kind::kNearCar: return kNearCarText;
    case Kind::kOffSidewalk: return "Bad, it is on the " + f.terrain + ".";
    case Kind::kPath: return kPathText;
  }
  return kGoodText;
}

std::string numbered(const char* prefix, int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%03d", prefix, i);
  return buf;
}

}  // namespace

dsl::Program Teacher::program() const { return dsl::Program::from_sketch(dsl::substitute(sketch, hidden)); }

Teacher make_teacher(Rng& rng) {
  Teacher t;
  t.sketch = dsl::parse_program(kTeacherSketch);
  std::uniform_real_distribution<double> threshold(2.0, 4.0);
  t.hidden["t_person"] = threshold(rng);
  t.hidden["t_car"] = threshold(rng);
  return t;
}

scene::Scene generate_scene(Rng& rng, const std::string& id, const std::string& region) {
  scene::Scene s;
  s.id = id;
  bool columns = region == kInRegion;
  s.width = columns ? 16 : 18;
  s.height = columns ? 16 : 14;
  s.terrain.assign(s.cell_count(), "grass");
  // Bands run along the major axis: road, then sidewalk, then grass.
  int across = columns ? s.width : s.height;
  int along = columns ? s.height : s.width;
  int road = uniform(rng, 3, 4);
  int walk = uniform(rng, 4, 6);
  int crossing = uniform(rng, 2, along - 3);
  auto at = [&](int a, int b) -> scene::Cell { return columns ? scene::Cell{b, a} : scene::Cell{a, b}; };
  for (int a = 0; a < across; ++a) {
    for (int b = 0; b < along; ++b) {
      std::string label = a < road ? "road" : a < road + walk ? "sidewalk" : "grass";
      if (label == "sidewalk" && b == crossing) label = "path";
      s.terrain[s.index(at(a, b))] = label;
    }
  }
  int persons = columns ? uniform(rng, 1, 3) : uniform(rng, 2, 4);
  for (int i = 0; i < persons; ++i) {
    scene::EntityInstance e;
    e.concept_name = "person";
    e.cells.push_back(at(uniform(rng, road, across - 1), uniform(rng, 0, along - 1)));
    s.entities.push_back(e);
  }
  int cars = columns ? uniform(rng, 1, 2) : uniform(rng, 1, 3);
  for (int i = 0; i < cars; ++i) {
    scene::EntityInstance e;
    e.concept_name = "car";
    int a = uniform(rng, 0, road - 1);
    int b = uniform(rng, 0, along - 2);
    e.cells = {at(a, b), at(a, b + 1)};
    e.attributes["is_moving"] = false;
    s.entities.push_back(e);
  }
  s.validate();
  return s;
}

scene::Mask teacher_mask(const Teacher& teacher, const scene::Scene& scene) {
  static const library::ConceptLibrary builtins;
  auto pred = dsl::evaluate_mask(teacher.program(), scene, builtins, dsl::default_perception());
  return positive_mask(pred, "good");
}

Experiment generate_experiment(const ExperimentConfig& config) {
  Rng rng(config.seed);
  Experiment ex;
  ex.teacher = make_teacher(rng);
  double tp = ex.teacher.hidden.at("t_person");
  double tc = ex.teacher.hidden.at("t_car");

  struct Drawn {
    Kind kind;
    CellFacts facts;
    std::shared_ptr<const scene::Scene> scene;
  };
  std::vector<Drawn> drawn;
  for (int i = 0; i < config.demos; ++i) {
    Kind kind = kCycle[i % std::size(kCycle)];
    for (int attempt = 0;; ++attempt) {
      if (attempt == 200) throw Error(ErrorCode::kSchema, "could not place demonstration " + std::to_string(i));
      auto s = std::make_shared<const scene::Scene>(generate_scene(rng, numbered("train", i), kInRegion));
      if (auto f = pick_cell(rng, facts(*s), kind, tp, tc)) {
        drawn.push_back({kind, *f, s});
        break;
      }
    }
  }

  // Noise: alternately relabel an off-sidewalk cell as good and the good
  // cell with the widest margin as bad, each with a matching explanation.
  std::vector<std::size_t> flipped;
  for (int n = 0; n < config.noisy; ++n) {
    std::optional<std::size_t> choice;
    double widest = -1.0;
    for (std::size_t i = 0; i < drawn.size(); ++i) {
      if (std::find(flipped.begin(), flipped.end(), i) != flipped.end()) continue;
      const auto& d = drawn[i];
      if (n % 2 == 0 && (d.kind == Kind::kOffSidewalk || d.kind == Kind::kPath)) {
        choice = i;
        break;
      }
      if (n % 2 == 1 && d.kind == Kind::kGood) {
        double margin = std::min(d.facts.person - tp, d.facts.car - tc);
        if (margin > widest) {
          widest = margin;
          choice = i;
        }
      }
    }
    if (!choice) throw Error(ErrorCode::kSchema, "not enough demonstrations to mislabel");
    flipped.push_back(*choice);
  }

  for (std::size_t i = 0; i < drawn.size(); ++i) {
    const auto& d = drawn[i];
    bool good = d.kind == Kind::kGood;
    std::string text = explanation_for(d.kind, d.facts);
    bool noisy = std::find(flipped.begin(), flipped.end(), i) != flipped.end();
    if (noisy) {
      good = !good;
      text = good ? kGoodText : kNearPersonText;
    }
    auto demo = params::make_demonstration(d.scene, {{d.facts.cell, good ? "good" : "bad"}}, text);
    if (noisy) ex.mislabeled.push_back(demo.id);
    ex.demos.push_back(std::move(demo));
    ex.dataset.entries.push_back({d.scene->id, Split::kTrain, kInRegion, {}, {}, d.scene, teacher_mask(ex.teacher, *d.scene)});
  }
  std::sort(ex.mislabeled.begin(), ex.mislabeled.end());

  auto held_out = [&](Split split, const char* prefix, const char* region, int count) {
    for (int i = 0; i < count; ++i) {
      auto s = std::make_shared<const scene::Scene>(generate_scene(rng, numbered(prefix, i), region));
      ex.dataset.entries.push_back({s->id, split, region, {}, {}, s, teacher_mask(ex.teacher, *s)});
    }
  };
  held_out(Split::kInTest, "in", kInRegion, config.in_test);
  held_out(Split::kOutTest, "out", kOutRegion, config.out_test);
  ex.dataset.validate();
  return ex;
}

std::map<std::string, std::string> auxiliary_explanations() {
  return {{"is_far", "more than a few meters away"},
          {"is_close", "within a couple of meters"},
          {"in_way", "blocking the path"}};
}

void write_experiment(const Experiment& ex, const fs::path& dir) {
  fs::create_directories(dir / "scenes");
  LabeledDataset manifest;
  for (const auto& e : ex.dataset.entries) {
    DatasetEntry out = e;
    out.scene_path = dir / "scenes" / (e.scene_id + ".json");
    out.gt_path = dir / "masks" / (e.scene_id + ".json");
    scene::save_scene(*e.scene, out.scene_path);
    save_gt_mask(*e.gt, out.gt_path);
    out.scene.reset();
    out.gt.reset();
    manifest.entries.push_back(std::move(out));
  }
  save_manifest(manifest, dir / "manifest.json");
  for (std::size_t i = 0; i < ex.demos.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%03zu.json", i);
    io::write_json(dir / "demos" / name, params::demo_to_json(ex.demos[i]));
  }
  ordered_json hidden = ordered_json::object();
  for (const auto& [k, v] : ex.teacher.hidden) hidden[k] = v;
  io::write_json(dir / "teacher.json", ordered_json{{"sketch", dsl::print_program(ex.teacher.sketch)},
                                                    {"hidden", hidden},
                                                    {"mislabeled", ex.mislabeled}});
}

std::vector<params::Demonstration> load_demos(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<params::Demonstration> demos;
  for (const auto& f : files) demos.push_back(params::demo_from_json(io::read_json(f)));
  return demos;
}

}  // namespace prefprog::eval
