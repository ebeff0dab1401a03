#pragma once

#include <vector>

#include "wsod/layers.hpp"
#include "wsod/rng.hpp"
#include "wsod/tensor.hpp"

namespace wsod::dropblock {

struct DropBlockParams {
  double clamp_tau = 0.3;     // per-cell drop probability ceiling
  std::size_t block_size = 3; // odd, <= roi map size
  double temperature = 0.5;   // Gumbel-Softmax temperature
  std::size_t hidden = 16;    // main-path width of the residual block
};

// Per-cell two-logit Gumbel-Softmax over {keep, drop}. noise holds one
// Logistic(0,1) draw per cell (difference of the two Gumbel draws). hard is
// the {0,1} keep mask (argmax, an exact Bernoulli(p) drop); soft is the
// relaxed keep value used for the straight-through backward.
struct GumbelMask {
  Tensor hard;
  Tensor soft;
};
GumbelMask gumbel_hard_mask(const Tensor& prob, double temperature,
                            const std::vector<double>& noise);
void sample_logistic_noise(std::vector<double>& out, std::size_t n, Rng& rng);

// Block expansion: a cell is dropped when any center in its block_size
// window is dropped (product of keeps over the window). norm rescales each
// region by map area over surviving cells; an all-dropped region raises the
// degenerate flag and caps norm at the map area.
struct ExpandedMask {
  Tensor mask;                  // (N,H,W) in {0,1}
  std::vector<double> norm;     // per region, >= 1
  std::vector<char> degenerate; // all cells dropped
};
ExpandedMask expand_and_normalize(const Tensor& hard, std::size_t block_size);

// training: features ⊙ mask (broadcast over channels) × norm; inference: identity.
Tensor apply(const Tensor& rois, const ExpandedMask& em, bool training);

enum class Mode {
  Train,      // hard mask forward, straight-through backward
  Inference,  // exact identity
  SoftRelax,  // fully soft mask, norm 1 (used by gradient checks)
};

// Learned adversarial DropBlock: a small residual block on the pooled
// region features produces the per-cell drop probability map; cells are
// sampled hard via Gumbel-Softmax and expanded into square blocks.
class ConcreteDropBlock {
 public:
  ConcreteDropBlock(std::size_t c_in, const DropBlockParams& params);

  void init(Rng& rng);
  void set_accounting(seqbp::MemoryAccountant* acc);

  // Heatmap through the residual block, sigmoid, then min(p, tau).
  Tensor prob_map(const Tensor& rois, bool cache);

  // noise must hold rois.dim(0)*H*W logistic draws; sample with
  // sample_logistic_noise (phase a) and replay the same values when the
  // forward is recomputed (phase b).
  Tensor forward(const Tensor& rois, Mode mode, const std::vector<double>& noise, bool cache);
  Tensor backward(const Tensor& gy);  // d rois; accumulates theta grads
  void clear_cache();

  std::vector<layers::Param*> params();
  const DropBlockParams& config() const { return params_; }
  std::size_t degenerate_count() const { return degenerate_count_; }

 private:
  DropBlockParams params_;
  layers::Conv2d main1_, main2_, skip_;
  layers::ReLU relu_;
  seqbp::MemoryAccountant* acc_ = nullptr;

  // forward state for backward
  Mode mode_ = Mode::Inference;
  Tensor rois_, logits_, p_raw_, p_clamped_, soft_keep_, hard_keep_;
  ExpandedMask expanded_;
  Tensor soft_expanded_;
  std::vector<double> noise_;
  std::size_t cached_elems_ = 0;
  std::size_t degenerate_count_ = 0;
};

}  // namespace wsod::dropblock
