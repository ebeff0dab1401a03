#include "wsod/mist.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "wsod/milhead.hpp"

namespace wsod::mist {

std::size_t pool_size(std::size_t num_regions, double p) {
  auto n = static_cast<std::size_t>(std::ceil(p * static_cast<double>(num_regions)));
  return std::clamp<std::size_t>(n, 1, num_regions);
}

std::map<int, std::vector<PseudoBox>> mist_select(const Tensor& scores,
                                                  const geometry::ProposalSet& proposals,
                                                  const std::vector<int>& gt_classes,
                                                  double p, double tau) {
  const std::size_t r = proposals.boxes.size();
  if (scores.dim(0) != r) throw std::invalid_argument("scores/proposals size mismatch");
  if (p <= 0.0 || p > 1.0) throw std::invalid_argument("p must be in (0,1]");
  if (tau <= 0.0 || tau >= 1.0) throw std::invalid_argument("tau must be in (0,1)");

  std::map<int, std::vector<PseudoBox>> out;
  const std::size_t pool = pool_size(r, p);
  std::vector<std::size_t> order(r);
  for (int c : gt_classes) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return scores.at(a, static_cast<std::size_t>(c)) >
             scores.at(b, static_cast<std::size_t>(c));
    });

    std::vector<geometry::Box> pool_boxes(pool);
    for (std::size_t i = 0; i < pool; ++i) pool_boxes[i] = proposals.boxes[order[i]];

    std::vector<PseudoBox>& sel = out[c];
    for (std::size_t i : geometry::greedy_diverse_select_indices(pool_boxes, tau)) {
      std::size_t region = order[i];
      sel.push_back({region, c, proposals.boxes[region],
                     scores.at(region, static_cast<std::size_t>(c))});
    }
  }
  return out;
}

std::vector<PseudoBox> resolve_conflicts(const std::map<int, std::vector<PseudoBox>>& candidates) {
  // best (score, class) per region index; ties keep the lower class
  std::map<std::size_t, PseudoBox> best;
  for (const auto& [cls, boxes] : candidates) {
    for (const PseudoBox& pb : boxes) {
      auto it = best.find(pb.region);
      if (it == best.end() || pb.score > it->second.score)
        best[pb.region] = pb;
    }
  }
  std::vector<PseudoBox> out;
  for (const auto& [cls, boxes] : candidates)
    for (const PseudoBox& pb : boxes)
      if (best[pb.region].cls == cls) out.push_back(pb);
  return out;
}

RegionTargets assign_targets(const geometry::ProposalSet& proposals,
                             const std::vector<PseudoBox>& pseudo, double fg_iou,
                             int num_classes) {
  const std::size_t r = proposals.boxes.size();
  RegionTargets t;
  t.num_classes = num_classes;
  t.label.assign(r, num_classes);  // background
  t.weight.assign(r, 0.0);
  t.reg_target.assign(r, {0.0, 0.0, 0.0, 0.0});
  t.has_reg.assign(r, 0);
  if (pseudo.empty()) return t;  // degenerate teacher: all background, zero weights

  for (std::size_t i = 0; i < r; ++i) {
    double best_iou = -1.0;
    const PseudoBox* best = nullptr;
    for (const PseudoBox& pb : pseudo) {
      double v = geometry::iou(proposals.boxes[i], pb.box);
      if (v > best_iou) {
        best_iou = v;
        best = &pb;
      }
    }
    t.weight[i] = best->score;
    if (best_iou >= fg_iou) {
      t.label[i] = best->cls;
      t.reg_target[i] = box_delta(proposals.boxes[i], best->box);
      t.has_reg[i] = 1;
    }
  }
  return t;
}

double smooth_l1(double x) {
  double a = std::abs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

double smooth_l1_grad(double x) {
  if (x > 1.0) return 1.0;
  if (x < -1.0) return -1.0;
  return x;
}

std::array<double, 4> box_delta(const geometry::Box& from, const geometry::Box& to) {
  double w = from.width(), h = from.height();
  return {(to.cx() - from.cx()) / w, (to.cy() - from.cy()) / h,
          std::log(to.width() / w), std::log(to.height() / h)};
}

geometry::Box apply_delta(const geometry::Box& b, const std::array<double, 4>& d) {
  double cx = b.cx() + d[0] * b.width();
  double cy = b.cy() + d[1] * b.height();
  double w = b.width() * std::exp(d[2]);
  double h = b.height() * std::exp(d[3]);
  return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
}

double student_loss(const StudentBlock& block, const RegionTargets& targets) {
  const std::size_t r = block.probs.dim(0);
  if (targets.size() != r) throw std::invalid_argument("targets/block size mismatch");
  const double inv_r = 1.0 / static_cast<double>(r);
  const double inv_c = 1.0 / static_cast<double>(targets.num_classes);
  double loss = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    double lam = targets.weight[i];
    if (lam == 0.0) continue;
    double term = 0.0;
    if (targets.has_reg[i]) {
      for (int d = 0; d < 4; ++d)
        term += smooth_l1(block.deltas.at(i, static_cast<std::size_t>(d)) -
                          targets.reg_target[i][static_cast<std::size_t>(d)]);
    }
    double p = block.probs.at(i, static_cast<std::size_t>(targets.label[i]));
    term -= inv_c * std::log(std::max(p, milhead::kLogClampEps));
    loss += lam * term;
  }
  return loss * inv_r;
}

void student_loss_backward(const StudentBlock& block, const RegionTargets& targets,
                           Tensor& d_logits, Tensor& d_deltas) {
  const std::size_t r = block.probs.dim(0), kk = block.probs.dim(1);
  d_logits = Tensor{r, kk};
  d_deltas = Tensor{r, 4};
  const double inv_r = 1.0 / static_cast<double>(r);
  const double inv_c = 1.0 / static_cast<double>(targets.num_classes);
  for (std::size_t i = 0; i < r; ++i) {
    double lam = targets.weight[i];
    if (lam == 0.0) continue;
    // softmax-CE shortcut: d logit = scale * (p - onehot)
    double scale = lam * inv_r * inv_c;
    for (std::size_t j = 0; j < kk; ++j) d_logits.at(i, j) = scale * block.probs.at(i, j);
    d_logits.at(i, static_cast<std::size_t>(targets.label[i])) -= scale;
    if (targets.has_reg[i]) {
      for (std::size_t d = 0; d < 4; ++d)
        d_deltas.at(i, d) = lam * inv_r *
                            smooth_l1_grad(block.deltas.at(i, d) - targets.reg_target[i][d]);
    }
  }
}

std::vector<RegionTargets> ensemble_chain(const Tensor& teacher_joint,
                                          const std::vector<StudentBlock>& blocks,
                                          const geometry::ProposalSet& proposals,
                                          const std::vector<int>& gt_classes,
                                          const MistParams& mp,
                                          std::vector<std::vector<PseudoBox>>* pseudo_out) {
  if (blocks.empty()) throw std::invalid_argument("ensemble_chain needs at least one block");
  const int k = static_cast<int>(teacher_joint.dim(1));
  // a vanishing p collapses the candidate pool to the single top region
  const double p_eff = mp.top1 ? 1e-12 : mp.p;
  std::vector<RegionTargets> out;
  out.reserve(blocks.size());
  if (pseudo_out) pseudo_out->clear();
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    Tensor source;
    if (b == 0) {
      source = teacher_joint;
    } else {
      // previous block's foreground probabilities, background column dropped
      const Tensor& p = blocks[b - 1].probs;
      source = Tensor{p.dim(0), static_cast<std::size_t>(k)};
      for (std::size_t i = 0; i < p.dim(0); ++i)
        for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c)
          source.at(i, c) = p.at(i, c);
    }
    auto cand = mist_select(source, proposals, gt_classes, p_eff, mp.tau);
    auto resolved = resolve_conflicts(cand);
    if (pseudo_out) pseudo_out->push_back(resolved);
    out.push_back(assign_targets(proposals, resolved, mp.fg_iou, k));
  }
  return out;
}

AveragedPredictions inference_average(const std::vector<StudentBlock>& blocks,
                                      const geometry::ProposalSet& proposals) {
  if (blocks.empty()) throw std::invalid_argument("inference_average needs at least one block");
  const std::size_t r = blocks[0].probs.dim(0);
  const std::size_t k = blocks[0].probs.dim(1) - 1;
  AveragedPredictions out;
  out.scores = Tensor{r, k};
  out.boxes.assign(r, geometry::Box{});
  const double inv_b = 1.0 / static_cast<double>(blocks.size());
  for (std::size_t i = 0; i < r; ++i) {
    double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;
    for (const StudentBlock& blk : blocks) {
      for (std::size_t c = 0; c < k; ++c) out.scores.at(i, c) += inv_b * blk.probs.at(i, c);
      geometry::Box rb = apply_delta(proposals.boxes[i],
                                     {blk.deltas.at(i, 0), blk.deltas.at(i, 1),
                                      blk.deltas.at(i, 2), blk.deltas.at(i, 3)});
      x1 += rb.x1;
      y1 += rb.y1;
      x2 += rb.x2;
      y2 += rb.y2;
    }
    out.boxes[i] = {x1 * inv_b, y1 * inv_b, x2 * inv_b, y2 * inv_b};
  }
  return out;
}

void dump_pseudo_labels(std::ostream& os, const std::string& image_id,
                        const std::vector<PseudoBox>& pseudo) {
  for (const PseudoBox& pb : pseudo)
    os << image_id << ' ' << pb.cls << ' ' << pb.box.x1 << ' ' << pb.box.y1 << ' ' << pb.box.x2
       << ' ' << pb.box.y2 << ' ' << pb.score << '\n';
}

}  // namespace wsod::mist
