#include "prefprog/eval/dataset.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <map>
#include <set>
#include <thread>

#include "prefprog/dsl/evaluator.hpp"
#include "prefprog/error.hpp"
#include "prefprog/io.hpp"

namespace prefprog::eval {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string_view split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kInTest: return "in-test";
    case Split::kOutTest: return "out-test";
  }
  return "train";
}

Split split_from_name(std::string_view name) {
  for (auto s : kAllSplits) {
    if (split_name(s) == name) return s;
  }
  throw Error(ErrorCode::kSchema, "unknown split '" + std::string(name) + "'");
}

void LabeledDataset::validate() const {
  std::map<std::string, Split> seen;
  std::set<std::string> inside_regions;
  std::set<std::string> outside_regions;
  for (const auto& e : entries) {
    auto [it, fresh] = seen.emplace(e.scene_id, e.split);
    if (!fresh && it->second != e.split) {
      throw Error(ErrorCode::kSchema, "scene '" + e.scene_id + "' appears in both " +
                                          std::string(split_name(it->second)) + " and " +
                                          std::string(split_name(e.split)));
    }
    (e.split == Split::kOutTest ? outside_regions : inside_regions).insert(e.region);
  }
  for (const auto& r : outside_regions) {
    if (inside_regions.count(r)) {
      throw Error(ErrorCode::kSchema, "out-test region '" + r + "' also occurs in train or in-test");
    }
  }
}

LabeledDataset LabeledDataset::only(std::initializer_list<Split> splits) const {
  LabeledDataset out;
  for (const auto& e : entries) {
    for (auto s : splits) {
      if (e.split == s) out.entries.push_back(e);
    }
  }
  return out;
}

LabeledDataset load_manifest(const fs::path& path) {
  auto doc = io::read_json(path);
  if (!doc.is_array()) throw Error(ErrorCode::kSchema, "manifest must be a JSON array");
  auto base = path.parent_path();
  LabeledDataset ds;
  try {
    for (const auto& item : doc) {
      DatasetEntry e;
      e.scene_path = base / item.at("scene_path").get<std::string>();
      e.gt_path = base / item.at("gt_path").get<std::string>();
      e.split = split_from_name(item.at("split").get<std::string>());
      e.region = item.at("region").get<std::string>();
      e.scene_id = item.value("scene_id", e.scene_path.stem().string());
      ds.entries.push_back(std::move(e));
    }
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::kSchema, "malformed manifest entry: " + std::string(ex.what()));
  }
  ds.validate();
  return ds;
}

void save_manifest(const LabeledDataset& dataset, const fs::path& path) {
  auto base = path.parent_path();
  ordered_json doc = ordered_json::array();
  for (const auto& e : dataset.entries) {
    doc.push_back({{"scene_id", e.scene_id},
                   {"scene_path", fs::relative(e.scene_path, base).generic_string()},
                   {"gt_path", fs::relative(e.gt_path, base).generic_string()},
                   {"split", split_name(e.split)},
                   {"region", e.region}});
  }
  io::write_json(path, doc);
}

scene::Mask load_gt_mask(const fs::path& path) {
  auto doc = io::read_json(path);
  try {
    scene::Mask m(doc.at("width").get<int>(), doc.at("height").get<int>());
    for (const auto& cell : doc.at("positive")) {
      scene::Cell c{cell.at(0).get<int>(), cell.at(1).get<int>()};
      if (c.row < 0 || c.col < 0 || c.row >= m.height() || c.col >= m.width()) {
        throw Error(ErrorCode::kOutOfBounds, "mask cell outside the grid in " + path.string());
      }
      m.set(c);
    }
    return m;
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::kSchema, "malformed mask " + path.string() + ": " + ex.what());
  }
}

void save_gt_mask(const scene::Mask& mask, const fs::path& path) {
  ordered_json cells = ordered_json::array();
  for (const auto& c : mask.cells()) cells.push_back({c.row, c.col});
  io::write_json(path, ordered_json{{"width", mask.width()}, {"height", mask.height()}, {"positive", cells}});
}

const SplitReport& IouReport::split(Split s) const {
  for (const auto& r : splits) {
    if (r.split == s) return r;
  }
  throw Error(ErrorCode::kSchema, "report has no split " + std::string(split_name(s)));
}

IouEntry IouReport::overall() const {
  IouEntry sum;
  int n = 0;
  for (const auto& s : scenes) {
    if (s.failed) continue;
    sum.iou_pos += s.iou.iou_pos;
    sum.iou_neg += s.iou.iou_neg;
    ++n;
  }
  if (n == 0) return sum;
  sum.iou_pos /= n;
  sum.iou_neg /= n;
  sum.miou = (sum.iou_pos + sum.iou_neg) / 2.0;
  return sum;
}

namespace {

SceneResult evaluate_entry(const dsl::Program& program, const DatasetEntry& e, const library::ConceptLibrary& lib,
                           const scene::PerceptionProvider& perception, const EvalOptions& options) {
  SceneResult r;
  r.scene_id = e.scene_id;
  r.split = e.split;
  r.region = e.region;
  auto start = std::chrono::steady_clock::now();
  try {
    auto scene = e.scene ? e.scene : std::make_shared<const scene::Scene>(scene::load_scene(e.scene_path));
    auto gt = e.gt ? *e.gt : load_gt_mask(e.gt_path);
    auto pred = dsl::evaluate_mask(program, *scene, lib, perception, {options.use_cache, 1});
    r.iou = compute_iou(pred, gt, options.positive);
  } catch (const std::exception& ex) {
    r.failed = true;
    r.error = ex.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace

IouReport evaluate_dataset(const dsl::Program& program, const LabeledDataset& dataset,
                           const library::ConceptLibrary& lib, const scene::PerceptionProvider& perception,
                           const EvalOptions& options) {
  IouReport report;
  const auto n = dataset.entries.size();
  report.scenes.resize(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      report.scenes[i] = evaluate_entry(program, dataset.entries[i], lib, perception, options);
    }
  };
  int workers = std::max(1, std::min<int>(options.workers, static_cast<int>(n)));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  for (auto split : kAllSplits) {
    SplitReport s;
    s.split = split;
    double seconds = 0.0;
    for (const auto& r : report.scenes) {
      if (r.split != split) continue;
      if (r.failed) {
        ++s.failures;
        continue;
      }
      ++s.scenes;
      s.mean.iou_pos += r.iou.iou_pos;
      s.mean.iou_neg += r.iou.iou_neg;
      seconds += r.seconds;
    }
    if (s.scenes > 0) {
      s.mean.iou_pos /= s.scenes;
      s.mean.iou_neg /= s.scenes;
      s.mean.miou = (s.mean.iou_pos + s.mean.iou_neg) / 2.0;
      s.mean_seconds = seconds / s.scenes;
    }
    report.failures += s.failures;
    report.splits.push_back(s);
  }
  return report;
}

std::string report_csv(const IouReport& report) {
  std::string out = "split,scenes,failures,iou_pos,iou_neg,miou,mean_seconds\n";
  char buf[256];
  for (const auto& s : report.splits) {
    if (s.scenes == 0) {
      std::snprintf(buf, sizeof buf, "%s,0,%d,,,,\n", std::string(split_name(s.split)).c_str(), s.failures);
    } else {
      std::snprintf(buf, sizeof buf, "%s,%d,%d,%.2f,%.2f,%.2f,%.6f\n", std::string(split_name(s.split)).c_str(),
                    s.scenes, s.failures, s.mean.iou_pos, s.mean.iou_neg, s.mean.miou, s.mean_seconds);
    }
    out += buf;
  }
  return out;
}

ordered_json report_json(const IouReport& report) {
  auto entry = [](const IouEntry& e) {
    return ordered_json{{"iou_pos", e.iou_pos}, {"iou_neg", e.iou_neg}, {"miou", e.miou}};
  };
  ordered_json splits = ordered_json::array();
  for (const auto& s : report.splits) {
    ordered_json row{{"split", split_name(s.split)}, {"scenes", s.scenes}, {"failures", s.failures}};
    if (s.scenes > 0) {
      row.update(entry(s.mean));
      row["mean_seconds"] = s.mean_seconds;
    }
    splits.push_back(row);
  }
  ordered_json scenes = ordered_json::array();
  for (const auto& r : report.scenes) {
    ordered_json row{{"scene_id", r.scene_id}, {"split", split_name(r.split)}, {"region", r.region},
                     {"seconds", r.seconds}};
    if (r.failed) {
      row["error"] = r.error;
    } else {
      row.update(entry(r.iou));
    }
    scenes.push_back(row);
  }
  return {{"splits", splits}, {"scenes", scenes}, {"failures", report.failures}};
}

}  // namespace prefprog::eval
