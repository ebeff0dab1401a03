#include "wsod/evalmetrics.hpp"

#include <algorithm>
#include <set>

namespace wsod::evalmetrics {

namespace {

struct ClassGts {
  // per image: boxes and matched flags
  std::map<std::string, std::vector<geometry::Box>> boxes;
  std::size_t total = 0;
};

std::map<int, ClassGts> group_gts(const std::vector<GroundTruth>& gts) {
  std::map<int, ClassGts> out;
  for (const GroundTruth& g : gts) {
    out[g.cls].boxes[g.image_id].push_back(g.box);
    ++out[g.cls].total;
  }
  return out;
}

std::vector<const Detection*> sorted_class_dets(const std::vector<Detection>& dets, int cls) {
  std::vector<const Detection*> out;
  for (const Detection& d : dets)
    if (d.cls == cls) out.push_back(&d);
  std::stable_sort(out.begin(), out.end(),
                   [](const Detection* a, const Detection* b) {
                     return a->confidence > b->confidence;
                   });
  return out;
}

// greedy matching at one threshold; dets must be pre-sorted by confidence
std::size_t count_matches(const std::vector<const Detection*>& dets,
                          const std::map<std::string, std::vector<geometry::Box>>& gt_boxes,
                          double thresh) {
  std::map<std::string, std::vector<char>> used;
  std::size_t matches = 0;
  for (const Detection* d : dets) {
    auto it = gt_boxes.find(d->image_id);
    if (it == gt_boxes.end()) continue;
    std::vector<char>& flags = used[d->image_id];
    flags.resize(it->second.size(), 0);
    double best = 0.0;
    std::ptrdiff_t best_j = -1;
    for (std::size_t j = 0; j < it->second.size(); ++j) {
      if (flags[j]) continue;
      double v = geometry::iou(d->box, it->second[j]);
      if (v > best) {
        best = v;
        best_j = static_cast<std::ptrdiff_t>(j);
      }
    }
    if (best_j >= 0 && best >= thresh) {
      flags[static_cast<std::size_t>(best_j)] = 1;
      ++matches;
    }
  }
  return matches;
}

}  // namespace

PerClassResult average_precision(const std::vector<Detection>& dets,
                                 const std::vector<GroundTruth>& gts, double iou_thresh) {
  PerClassResult out;
  auto by_class = group_gts(gts);
  double sum = 0.0;
  for (auto& [cls, cgts] : by_class) {
    auto cdets = sorted_class_dets(dets, cls);

    std::map<std::string, std::vector<char>> used;
    std::vector<char> tp(cdets.size(), 0);
    for (std::size_t i = 0; i < cdets.size(); ++i) {
      const Detection* d = cdets[i];
      auto it = cgts.boxes.find(d->image_id);
      if (it == cgts.boxes.end()) continue;
      std::vector<char>& flags = used[d->image_id];
      flags.resize(it->second.size(), 0);
      double best = 0.0;
      std::ptrdiff_t best_j = -1;
      for (std::size_t j = 0; j < it->second.size(); ++j) {
        if (flags[j]) continue;
        double v = geometry::iou(d->box, it->second[j]);
        if (v > best) {
          best = v;
          best_j = static_cast<std::ptrdiff_t>(j);
        }
      }
      if (best_j >= 0 && best >= iou_thresh) {
        flags[static_cast<std::size_t>(best_j)] = 1;
        tp[i] = 1;
      }
    }

    // all-point interpolated area under the PR curve
    std::vector<double> recall, precision;
    std::size_t ctp = 0, cfp = 0;
    for (std::size_t i = 0; i < cdets.size(); ++i) {
      if (tp[i])
        ++ctp;
      else
        ++cfp;
      recall.push_back(static_cast<double>(ctp) / static_cast<double>(cgts.total));
      precision.push_back(static_cast<double>(ctp) / static_cast<double>(ctp + cfp));
    }
    double ap = 0.0;
    // precision envelope from the right, summed over recall increments
    double env = 0.0, prev_recall = 0.0;
    std::vector<double> envelope(precision.size());
    for (std::size_t i = precision.size(); i-- > 0;) {
      env = std::max(env, precision[i]);
      envelope[i] = env;
    }
    for (std::size_t i = 0; i < recall.size(); ++i) {
      ap += (recall[i] - prev_recall) * envelope[i];
      prev_recall = recall[i];
    }
    out.per_class[cls] = ap;
    sum += ap;
  }
  if (!out.per_class.empty()) out.mean = sum / static_cast<double>(out.per_class.size());
  return out;
}

PerClassResult corloc(const std::vector<Detection>& dets, const std::vector<GroundTruth>& gts) {
  PerClassResult out;
  auto by_class = group_gts(gts);
  double sum = 0.0;
  for (auto& [cls, cgts] : by_class) {
    std::size_t hits = 0;
    for (const auto& [image_id, boxes] : cgts.boxes) {
      const Detection* top = nullptr;
      for (const Detection& d : dets) {
        if (d.cls != cls || d.image_id != image_id) continue;
        if (!top || d.confidence > top->confidence) top = &d;
      }
      if (!top) continue;  // no detection counts as a miss
      for (const geometry::Box& g : boxes) {
        if (geometry::iou(top->box, g) >= 0.5) {
          ++hits;
          break;
        }
      }
    }
    double rate = static_cast<double>(hits) / static_cast<double>(cgts.boxes.size());
    out.per_class[cls] = rate;
    sum += rate;
  }
  if (!out.per_class.empty()) out.mean = sum / static_cast<double>(out.per_class.size());
  return out;
}

ArResult average_recall(const std::vector<Detection>& dets,
                        const std::vector<GroundTruth>& gts, int max_dets) {
  ArResult out;
  auto by_class = group_gts(gts);

  constexpr double kSmall = 32.0 * 32.0, kLarge = 96.0 * 96.0;
  auto bucket_of = [&](const geometry::Box& b) {
    double a = b.area();
    if (a < kSmall) return 0;
    if (a < kLarge) return 1;
    return 2;
  };

  // bucket -1 means all sizes
  auto ar_for_bucket = [&](int bucket, bool& any) {
    double sum = 0.0;
    std::size_t classes = 0;
    for (auto& [cls, cgts] : by_class) {
      std::map<std::string, std::vector<geometry::Box>> filtered;
      std::size_t total = 0;
      for (const auto& [image_id, boxes] : cgts.boxes)
        for (const geometry::Box& b : boxes)
          if (bucket < 0 || bucket_of(b) == bucket) {
            filtered[image_id].push_back(b);
            ++total;
          }
      if (total == 0) continue;
      ++classes;

      // top max_dets per image for this class
      auto cdets = sorted_class_dets(dets, cls);
      std::map<std::string, int> taken;
      std::vector<const Detection*> capped;
      for (const Detection* d : cdets)
        if (taken[d->image_id]++ < max_dets) capped.push_back(d);

      double recall_sum = 0.0;
      for (int k = 0; k < 10; ++k) {
        double t = static_cast<double>(50 + 5 * k) / 100.0;
        recall_sum +=
            static_cast<double>(count_matches(capped, filtered, t)) / static_cast<double>(total);
      }
      sum += recall_sum / 10.0;
    }
    any = classes > 0;
    return classes > 0 ? sum / static_cast<double>(classes) : 0.0;
  };

  bool any = false;
  out.overall = ar_for_bucket(-1, any);
  out.small = ar_for_bucket(0, out.has_small);
  out.medium = ar_for_bucket(1, out.has_medium);
  out.large = ar_for_bucket(2, out.has_large);
  return out;
}

}  // namespace wsod::evalmetrics
