#include "wsod/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace wsod::geometry {

bool valid_box(const Box& b) {
  return std::isfinite(b.x1) && std::isfinite(b.y1) && std::isfinite(b.x2) &&
         std::isfinite(b.y2) && b.x2 > b.x1 && b.y2 > b.y1;
}

double iou(const Box& a, const Box& b) {
  double ix = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  double iy = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  double inter = ix * iy;
  return inter / (a.area() + b.area() - inter);
}

Box clip_box(const Box& b, double w, double h) {
  Box c{std::clamp(b.x1, 0.0, w), std::clamp(b.y1, 0.0, h), std::clamp(b.x2, 0.0, w),
        std::clamp(b.y2, 0.0, h)};
  if (c.width() <= 0.0 || c.height() <= 0.0 || c.area() < kMinBoxArea) throw ZeroAreaAfterClip{};
  return c;
}

std::vector<std::size_t> greedy_diverse_select_indices(const std::vector<Box>& sorted_boxes,
                                                       double threshold) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < sorted_boxes.size(); ++i) {
    bool diverse = true;
    for (std::size_t j : kept) {
      if (iou(sorted_boxes[i], sorted_boxes[j]) >= threshold) {
        diverse = false;
        break;
      }
    }
    if (diverse) kept.push_back(i);
  }
  return kept;
}

std::vector<Box> greedy_diverse_select(const std::vector<Box>& sorted_boxes, double threshold) {
  std::vector<Box> out;
  for (std::size_t i : greedy_diverse_select_indices(sorted_boxes, threshold))
    out.push_back(sorted_boxes[i]);
  return out;
}

}  // namespace wsod::geometry
