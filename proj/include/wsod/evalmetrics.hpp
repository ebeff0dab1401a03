#pragma once

#include <map>
#include <string>
#include <vector>

#include "wsod/geometry.hpp"

namespace wsod::evalmetrics {

struct Detection {
  std::string image_id;
  int cls = 0;
  geometry::Box box;
  double confidence = 0.0;
};

struct GroundTruth {
  std::string image_id;
  int cls = 0;
  geometry::Box box;
};

struct PerClassResult {
  std::map<int, double> per_class;
  double mean = 0.0;  // over classes present in the ground truth
};

// VOC-style all-point interpolated AP with greedy matching (each GT matched
// at most once, by descending confidence).
PerClassResult average_precision(const std::vector<Detection>& dets,
                                 const std::vector<GroundTruth>& gts, double iou_thresh);

// Fraction of positive images whose single most confident detection hits
// any ground-truth box of that class at IoU >= 0.5.
PerClassResult corloc(const std::vector<Detection>& dets,
                      const std::vector<GroundTruth>& gts);

// COCO-style AR: recall averaged over IoU thresholds .50:.05:.95 with at
// most max_dets detections per image per class, plus size-bucketed values
// (small < 32^2 <= medium < 96^2 <= large, by GT area).
struct ArResult {
  double overall = 0.0;
  double small = 0.0, medium = 0.0, large = 0.0;
  bool has_small = false, has_medium = false, has_large = false;
};
ArResult average_recall(const std::vector<Detection>& dets,
                        const std::vector<GroundTruth>& gts, int max_dets);

}  // namespace wsod::evalmetrics
