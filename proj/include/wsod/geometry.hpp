#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace wsod::geometry {

// Axis-aligned box, corner convention with exclusive continuous coordinates:
// area = (x2-x1)*(y2-y1), both extents strictly positive.
struct Box {
  double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  double cx() const { return 0.5 * (x1 + x2); }
  double cy() const { return 0.5 * (y1 + y2); }
  bool operator==(const Box&) const = default;
};

struct ProposalSet {
  std::string image_id;
  double width = 0.0, height = 0.0;
  std::vector<Box> boxes;
};

struct ZeroAreaAfterClip : std::runtime_error {
  ZeroAreaAfterClip() : std::runtime_error("box area collapsed to zero after clipping") {}
};

inline constexpr double kMinBoxArea = 1e-6;  // px^2, rejection threshold after clipping

bool valid_box(const Box& b);
double iou(const Box& a, const Box& b);

// Clamp into [0,w]x[0,h]; throws ZeroAreaAfterClip when the clipped area
// falls below kMinBoxArea.
Box clip_box(const Box& b, double w, double h);

// Greedy IoU-diverse selection over boxes already sorted by descending
// score. The first box is always kept; a later box is kept iff its IoU with
// every previously kept box is strictly below threshold. Returns indices
// into the input, in order.
std::vector<std::size_t> greedy_diverse_select_indices(const std::vector<Box>& sorted_boxes,
                                                       double threshold);
std::vector<Box> greedy_diverse_select(const std::vector<Box>& sorted_boxes, double threshold);

}  // namespace wsod::geometry
