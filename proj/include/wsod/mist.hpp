#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <vector>

#include "wsod/geometry.hpp"
#include "wsod/tensor.hpp"

namespace wsod::mist {

struct MistParams {
  double p = 0.15;       // top-percentage for the candidate pool
  double tau = 0.2;      // IoU diversity threshold
  double fg_iou = 0.5;   // foreground assignment threshold
  bool top1 = false;     // candidate pool of exactly one (top-scoring baseline)
};

struct PseudoBox {
  std::size_t region = 0;  // proposal index
  int cls = -1;
  geometry::Box box;
  double score = 0.0;
};

// Completed per-region supervision for one student block. label is an index
// into [0, num_classes], where num_classes denotes background; weight is the
// per-region scalar; regression targets exist for foreground regions only.
struct RegionTargets {
  int num_classes = 0;
  std::vector<int> label;
  std::vector<double> weight;
  std::vector<std::array<double, 4>> reg_target;
  std::vector<char> has_reg;

  std::size_t size() const { return label.size(); }
};

// Candidate pool size: top ceil(p*|R|) regions, at least one.
std::size_t pool_size(std::size_t num_regions, double p);

// Pseudo-box generation: per ground-truth class, sort regions by score
// descending (ties by lower proposal index), pick the top-p pool, then keep
// an IoU-diverse subset greedily.
std::map<int, std::vector<PseudoBox>> mist_select(const Tensor& scores,
                                                  const geometry::ProposalSet& proposals,
                                                  const std::vector<int>& gt_classes,
                                                  double p, double tau);

// A region selected for several classes keeps only the highest-scoring
// class; exact ties go to the lower class index.
std::vector<PseudoBox> resolve_conflicts(const std::map<int, std::vector<PseudoBox>>& candidates);

// Max-IoU matching of every region against the resolved pseudo boxes.
RegionTargets assign_targets(const geometry::ProposalSet& proposals,
                             const std::vector<PseudoBox>& pseudo, double fg_iou,
                             int num_classes);

double smooth_l1(double x);
double smooth_l1_grad(double x);

// Standard four-delta parameterization from proposal to target box.
std::array<double, 4> box_delta(const geometry::Box& from, const geometry::Box& to);
geometry::Box apply_delta(const geometry::Box& b, const std::array<double, 4>& d);

struct StudentBlock {
  Tensor probs;   // R×(K+1), rows sum to 1, column K is background
  Tensor deltas;  // R×4, class-agnostic
};

double student_loss(const StudentBlock& block, const RegionTargets& targets);
// Gradients w.r.t. the classification logits (pre-softmax) and deltas.
void student_loss_backward(const StudentBlock& block, const RegionTargets& targets,
                           Tensor& d_logits, Tensor& d_deltas);

// Self-ensembling: block 1 is labeled from the teacher joint scores (R×K),
// block n+1 from block n's foreground probabilities. pseudo_out, when given,
// receives the resolved pseudo boxes per block (for dumps/inspection).
std::vector<RegionTargets> ensemble_chain(const Tensor& teacher_joint,
                                          const std::vector<StudentBlock>& blocks,
                                          const geometry::ProposalSet& proposals,
                                          const std::vector<int>& gt_classes,
                                          const MistParams& mp,
                                          std::vector<std::vector<PseudoBox>>* pseudo_out = nullptr);

struct AveragedPredictions {
  Tensor scores;                    // R×K, mean over blocks, background dropped
  std::vector<geometry::Box> boxes; // per-block refined boxes averaged in coordinate space
};
AveragedPredictions inference_average(const std::vector<StudentBlock>& blocks,
                                      const geometry::ProposalSet& proposals);

// Debug dump, one line per pseudo box: image_id class x1 y1 x2 y2 score.
void dump_pseudo_labels(std::ostream& os, const std::string& image_id,
                        const std::vector<PseudoBox>& pseudo);

}  // namespace wsod::mist
