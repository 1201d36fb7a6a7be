#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "prefprog/dsl/program.hpp"
#include "prefprog/eval/metrics.hpp"
#include "prefprog/library/concept_library.hpp"
#include "prefprog/scene/perception.hpp"
#include "prefprog/scene/scene.hpp"

namespace prefprog::eval {

enum class Split { kTrain, kInTest, kOutTest };
inline constexpr Split kAllSplits[] = {Split::kTrain, Split::kInTest, Split::kOutTest};

std::string_view split_name(Split split);
Split split_from_name(std::string_view name);

// A labeled scene. Paths are used when the scene or mask is not held in
// memory; loading happens at evaluation time so one unreadable file fails
// only its own entry.
struct DatasetEntry {
  std::string scene_id;
  Split split = Split::kTrain;
  std::string region;
  std::filesystem::path scene_path;
  std::filesystem::path gt_path;
  std::shared_ptr<const scene::Scene> scene;
  std::optional<scene::Mask> gt;
};

struct LabeledDataset {
  std::vector<DatasetEntry> entries;

  // Throws kSchema when a scene id appears in two splits or when an
  // out-test region also occurs in train or in-test.
  void validate() const;
  LabeledDataset only(std::initializer_list<Split> splits) const;
};

// Manifest: JSON array of {scene_path, gt_path, split, region}; relative
// paths resolve against the manifest's directory. Scene ids are the file
// stems unless an explicit "scene_id" is given.
LabeledDataset load_manifest(const std::filesystem::path& path);
void save_manifest(const LabeledDataset& dataset, const std::filesystem::path& path);

// Ground-truth mask file: {"width", "height", "positive": [[row, col], ...]}.
scene::Mask load_gt_mask(const std::filesystem::path& path);
void save_gt_mask(const scene::Mask& mask, const std::filesystem::path& path);

struct SceneResult {
  std::string scene_id;
  Split split = Split::kTrain;
  std::string region;
  bool failed = false;
  std::string error;
  IouEntry iou;
  double seconds = 0.0;
};

struct SplitReport {
  Split split = Split::kTrain;
  int scenes = 0;    // evaluated successfully
  int failures = 0;
  IouEntry mean;     // over scenes of the split
  double mean_seconds = 0.0;
};

struct IouReport {
  std::vector<SplitReport> splits;  // train, in-test, out-test
  std::vector<SceneResult> scenes;  // manifest order
  int failures = 0;

  const SplitReport& split(Split s) const;
  // Mean over every successfully evaluated scene.
  IouEntry overall() const;
};

struct EvalOptions {
  int workers = 1;
  bool use_cache = true;
  std::string positive = "good";
};

IouReport evaluate_dataset(const dsl::Program& program, const LabeledDataset& dataset,
                           const library::ConceptLibrary& lib, const scene::PerceptionProvider& perception,
                           const EvalOptions& options = {});

// One row per split: split,scenes,failures,iou_pos,iou_neg,miou,mean_seconds.
std::string report_csv(const IouReport& report);
nlohmann::ordered_json report_json(const IouReport& report);

}  // namespace prefprog::eval
