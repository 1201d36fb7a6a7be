#pragma once

#include <string>

#include "prefprog/scene/scene.hpp"

namespace prefprog::eval {

// Percentages in [0, 100]. A class absent from both masks scores 100.
struct IouEntry {
  double iou_pos = 0.0;
  double iou_neg = 0.0;
  double miou = 0.0;
};

// Throws Error(kDimensionMismatch) when the grids differ.
IouEntry compute_iou(const scene::Mask& pred, const scene::Mask& gt);
// Cells labeled `positive` form the predicted positive class.
IouEntry compute_iou(const scene::PreferenceMask& pred, const scene::Mask& gt, const std::string& positive = "good");

scene::Mask positive_mask(const scene::PreferenceMask& pred, const std::string& positive = "good");

}  // namespace prefprog::eval
