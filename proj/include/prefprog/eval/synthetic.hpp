#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "prefprog/dsl/program.hpp"
#include "prefprog/eval/dataset.hpp"
#include "prefprog/params/demonstration.hpp"
#include "prefprog/scene/scene.hpp"

namespace prefprog::eval {

// Region ids of the synthetic campus. Training and in-distribution test
// scenes come from the first, out-of-distribution test scenes from the
// second, which uses a different layout, grid shape and crowd density.
inline constexpr const char* kInRegion = "north_quad";
inline constexpr const char* kOutRegion = "south_lot";

// Ground-truth labeler: a two-hole program over built-in features whose hole
// values are hidden from the learner.
struct Teacher {
  dsl::Sketch sketch;
  dsl::Assignment hidden;

  dsl::Program program() const;
};

Teacher make_teacher(std::mt19937_64& rng);

// Terrain bands (road, sidewalk, grass) crossed by a path, with people and
// parked cars. Every scene has at least one person and one car.
scene::Scene generate_scene(std::mt19937_64& rng, const std::string& id, const std::string& region);

// Positive cells of the teacher's mask.
scene::Mask teacher_mask(const Teacher& teacher, const scene::Scene& scene);

struct ExperimentConfig {
  std::uint64_t seed = 1;
  int demos = 29;
  int in_test = 25;
  int out_test = 25;
  int noisy = 0;  // demonstrations given the wrong label
};

struct Experiment {
  Teacher teacher;
  std::vector<params::Demonstration> demos;
  std::vector<std::string> mislabeled;  // demo ids, sorted
  LabeledDataset dataset;               // train = the demo scenes
};

// Demonstrations label one cell each and explain the label the way a user
// would: good cells cite all conditions, bad cells cite the one that fails.
// Cells are chosen to be informative, near a threshold where possible.
Experiment generate_experiment(const ExperimentConfig& config);

// Explanations a user gives when asked what the auxiliary concepts of the
// experiment mean.
std::map<std::string, std::string> auxiliary_explanations();

// Writes scenes/, masks/, demos/NNN.json, manifest.json and teacher.json.
void write_experiment(const Experiment& experiment, const std::filesystem::path& dir);
std::vector<params::Demonstration> load_demos(const std::filesystem::path& dir);

}  // namespace prefprog::eval
