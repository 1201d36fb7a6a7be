#include "prefprog/eval/metrics.hpp"

#include "prefprog/error.hpp"

namespace prefprog::eval {

namespace {

double ratio(std::size_t inter, std::size_t uni) {
  return uni == 0 ? 100.0 : 100.0 * static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

IouEntry compute_iou(const scene::Mask& pred, const scene::Mask& gt) {
  if (pred.width() != gt.width() || pred.height() != gt.height()) {
    throw Error(ErrorCode::kDimensionMismatch, "prediction is " + std::to_string(pred.width()) + "x" +
                                                   std::to_string(pred.height()) + ", ground truth is " +
                                                   std::to_string(gt.width()) + "x" + std::to_string(gt.height()));
  }
  std::size_t pos_inter = 0, pos_union = 0, neg_inter = 0, neg_union = 0;
  for (int r = 0; r < gt.height(); ++r) {
    for (int c = 0; c < gt.width(); ++c) {
      bool p = pred.test({r, c});
      bool g = gt.test({r, c});
      pos_inter += p && g;
      pos_union += p || g;
      neg_inter += !p && !g;
      neg_union += !p || !g;
    }
  }
  IouEntry e;
  e.iou_pos = ratio(pos_inter, pos_union);
  e.iou_neg = ratio(neg_inter, neg_union);
  e.miou = (e.iou_pos + e.iou_neg) / 2.0;
  return e;
}

scene::Mask positive_mask(const scene::PreferenceMask& pred, const std::string& positive) {
  scene::Mask m(pred.width, pred.height);
  for (int r = 0; r < pred.height; ++r) {
    for (int c = 0; c < pred.width; ++c) {
      if (pred.at({r, c}) == positive) m.set({r, c});
    }
  }
  return m;
}

IouEntry compute_iou(const scene::PreferenceMask& pred, const scene::Mask& gt, const std::string& positive) {
  if (pred.labels.size() != static_cast<std::size_t>(pred.width) * static_cast<std::size_t>(pred.height)) {
    throw Error(ErrorCode::kDimensionMismatch, "preference mask has the wrong number of cells");
  }
  return compute_iou(positive_mask(pred, positive), gt);
}

}  // namespace prefprog::eval
