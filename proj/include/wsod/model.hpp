#pragma once

#include <memory>
#include <optional>
#include <vector>

#include "wsod/config.hpp"
#include "wsod/data.hpp"
#include "wsod/dropblock.hpp"
#include "wsod/evalmetrics.hpp"
#include "wsod/layers.hpp"
#include "wsod/milhead.hpp"
#include "wsod/mist.hpp"
#include "wsod/seqbp.hpp"

namespace wsod::model {

// The toy detector: 3-conv Base (stride 4), ROI max pooling, optional
// (Concrete) DropBlock on the pooled maps, a 2-layer fully connected Neck,
// and a Head with the two-branch MIL teacher plus stacked student blocks.
class Detector : public seqbp::RegionPipeline {
 public:
  Detector(const RunConfig& cfg, Rng& init_rng);

  void set_accountant(seqbp::MemoryAccountant* acc);
  seqbp::MemoryAccountant* accountant() override { return acc_; }

  // Training-iteration context: the scene supplies image, proposals, and
  // labels; noise_rng drives DropBlock sampling.
  void begin_iteration(const data::SyntheticScene* scene, Rng* noise_rng);

  std::size_t num_regions() const override;
  Tensor base_forward(bool cache) override;
  void base_backward(const Tensor& g_ab) override;
  void base_clear() override;
  Tensor region_forward(const Tensor& a_b, std::size_t begin, std::size_t end,
                        bool cache) override;
  void region_backward(const Tensor& g_rows, std::size_t begin, std::size_t end,
                       Tensor& g_ab) override;
  void region_clear() override;
  seqbp::HeadLosses head_forward(const Tensor& embeddings, bool cache) override;
  Tensor head_backward() override;
  void head_clear() override;

  std::vector<layers::Param*> params();
  void zero_grads();

  std::vector<evalmetrics::Detection> infer(const data::SyntheticScene& scene);

  // teacher pseudo boxes for one scene (inference forward, debug dumps)
  std::vector<mist::PseudoBox> pseudo_labels(const data::SyntheticScene& scene);

  // pseudo boxes of the last head_forward, per student block
  const std::vector<std::vector<mist::PseudoBox>>& last_pseudo() const { return last_pseudo_; }
  dropblock::ConcreteDropBlock* concrete_dropblock() { return drop_ ? drop_.get() : nullptr; }
  const RunConfig& config() const { return cfg_; }

 private:
  Tensor pooled_forward(const Tensor& a_b, std::size_t begin, std::size_t end, bool cache);
  void ensure_noise(std::size_t end_region);
  mist::MistParams mist_params() const;

  RunConfig cfg_;
  double spatial_scale_ = 0.25;

  layers::Conv2d conv1_, conv2_, conv3_;
  layers::ReLU brelu1_, brelu2_, brelu3_;
  std::unique_ptr<dropblock::ConcreteDropBlock> drop_;
  layers::Linear fc1_, fc2_;
  layers::ReLU nrelu1_, nrelu2_;
  layers::Linear fc_f_, fc_g_;
  struct Student {
    layers::Linear cls;
    layers::Linear reg;
  };
  std::vector<Student> students_;

  seqbp::MemoryAccountant* acc_ = nullptr;
  const data::SyntheticScene* scene_ = nullptr;
  Rng* noise_rng_ = nullptr;
  bool training_ = false;

  // per-iteration noise caches, grown lazily in ascending region order so
  // that streamed and full-batch forwards draw identical values
  std::vector<double> logistic_noise_;
  std::vector<double> uniform_noise_;
  std::size_t noise_regions_ = 0;

  // region-span caches
  std::vector<std::int64_t> pool_argmax_;
  std::size_t region_cached_elems_ = 0;
  std::optional<dropblock::ExpandedMask> fixed_mask_;
  Tensor fixed_cached_pooled_;

  // head caches
  Tensor f_, g_;
  milhead::ScoreMatrix sm_;
  std::vector<mist::StudentBlock> blocks_;
  std::vector<mist::RegionTargets> targets_;
  std::vector<std::vector<mist::PseudoBox>> last_pseudo_;
  std::size_t head_cached_elems_ = 0;
};

}  // namespace wsod::model
