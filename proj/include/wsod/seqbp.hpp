#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include "wsod/accounting.hpp"
#include "wsod/tensor.hpp"

namespace wsod::seqbp {

struct PlanError : std::runtime_error {
  explicit PlanError(const std::string& what) : std::runtime_error(what) {}
};

// Contiguous region ranges covering [0,N) exactly once.
struct SubBatchPlan {
  std::vector<std::pair<std::size_t, std::size_t>> ranges;

  static SubBatchPlan uniform(std::size_t n, std::size_t sub_batch_size);
  void validate(std::size_t n) const;  // throws PlanError on gap or overlap
};

struct HeadLosses {
  double total = 0.0;
  double image = 0.0;
  std::vector<double> roi_per_block;
};

// The three-stage pipeline the scheduler drives. Base maps the image to a
// feature map; the region span (pool + DropBlock + Neck) maps feature-map
// rows to embeddings; the Head consumes all embeddings at once.
//
// Caching contract: forward(cache=true) retains exactly what the matching
// backward needs; backward must directly follow its forward.
class RegionPipeline {
 public:
  virtual ~RegionPipeline() = default;

  virtual std::size_t num_regions() const = 0;

  virtual Tensor base_forward(bool cache) = 0;
  virtual void base_backward(const Tensor& g_ab) = 0;
  virtual void base_clear() = 0;

  virtual Tensor region_forward(const Tensor& a_b, std::size_t begin, std::size_t end,
                                bool cache) = 0;
  // g_rows is dLoss/d embeddings for rows [begin,end); gradients w.r.t. the
  // base feature map are scatter-added into g_ab.
  virtual void region_backward(const Tensor& g_rows, std::size_t begin, std::size_t end,
                               Tensor& g_ab) = 0;
  virtual void region_clear() = 0;

  virtual HeadLosses head_forward(const Tensor& embeddings, bool cache) = 0;
  virtual Tensor head_backward() = 0;  // dLoss/d embeddings (G_n)
  virtual void head_clear() = 0;

  virtual MemoryAccountant* accountant() { return nullptr; }
};

enum class Mode { Vanilla, SeqBp };

// Phase (a) forward: full forward with the region span streamed over the
// plan so no region activation survives; only A_b and the Head inputs are
// retained.
struct ForwardState {
  Tensor a_b;
  Tensor embeddings;
};
ForwardState forward_pass(RegionPipeline& p, const SubBatchPlan& plan);

// Phase (a) backward of the Head: losses, Head parameter gradients, and G_n.
struct HeadStepResult {
  HeadLosses losses;
  Tensor g_n;
  bool finite = true;
};
HeadStepResult head_step(RegionPipeline& p, ForwardState& state);

// Phase (b): per sub-batch, re-pool from A_b, re-run the region span with
// caching, backprop the matching G_n slice; region parameter gradients are
// accumulated and per-region gradients scatter into G_b. No two sub-batches'
// region activations coexist.
Tensor neck_sequential_step(RegionPipeline& p, const Tensor& a_b, const Tensor& g_n,
                            const SubBatchPlan& plan);

// Phase (c): re-run the Base forward with caching and backprop G_b.
void base_step(RegionPipeline& p, const Tensor& g_b);

struct IterationResult {
  HeadLosses losses;
  bool finite = true;
  std::size_t peak_region_units = 0;   // per-region recomputation span
  std::size_t peak_total_units = 0;    // everything the schedule retained
  std::size_t peak_base_units = 0;
  std::size_t peak_head_units = 0;
  std::size_t peak_boundary_units = 0;
};

// One full training iteration (gradient accumulation only; the optimizer
// step is the caller's).
IterationResult run_iteration(RegionPipeline& p, Mode mode, std::size_t sub_batch_size);

}  // namespace wsod::seqbp
