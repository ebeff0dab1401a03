#include "wsod/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "wsod/kernels.hpp"

namespace wsod::model {

Detector::Detector(const RunConfig& cfg, Rng& init_rng)
    : cfg_(cfg),
      conv1_("base.conv1", 3, cfg.base_c1, 3, 1, 1),
      conv2_("base.conv2", cfg.base_c1, cfg.base_c2, 3, 2, 1),
      conv3_("base.conv3", cfg.base_c2, cfg.base_c3, 3, 2, 1),
      fc1_("neck.fc1", cfg.base_c3 * cfg.roi_size * cfg.roi_size, cfg.neck_hidden),
      fc2_("neck.fc2", cfg.neck_hidden, cfg.embed_dim),
      fc_f_("head.f", cfg.embed_dim, static_cast<std::size_t>(cfg.num_classes)),
      fc_g_("head.g", cfg.embed_dim, static_cast<std::size_t>(cfg.num_classes)) {
  cfg_.validate();
  spatial_scale_ = 0.25;  // two stride-2 convolutions
  if (cfg_.drop == DropMode::Concrete) {
    dropblock::DropBlockParams dp;
    dp.clamp_tau = cfg_.drop_clamp_tau;
    dp.block_size = cfg_.block_size;
    dp.temperature = cfg_.gumbel_temperature;
    dp.hidden = cfg_.drop_hidden;
    drop_ = std::make_unique<dropblock::ConcreteDropBlock>(cfg_.base_c3, dp);
  }
  for (int s = 0; s < cfg_.students; ++s) {
    students_.push_back(
        {layers::Linear("student" + std::to_string(s) + ".cls", cfg_.embed_dim,
                        static_cast<std::size_t>(cfg_.num_classes) + 1),
         layers::Linear("student" + std::to_string(s) + ".reg", cfg_.embed_dim, 4)});
  }

  conv1_.init_he(init_rng);
  conv2_.init_he(init_rng);
  conv3_.init_he(init_rng);
  fc1_.init_he(init_rng);
  fc2_.init_he(init_rng);
  fc_f_.init_gaussian(init_rng, 0.01);
  fc_g_.init_gaussian(init_rng, 0.01);
  for (Student& s : students_) {
    s.cls.init_gaussian(init_rng, 0.01);
    s.reg.init_gaussian(init_rng, 0.001);
  }
  if (drop_) drop_->init(init_rng);
}

void Detector::set_accountant(seqbp::MemoryAccountant* acc) {
  acc_ = acc;
  conv1_.set_accounting(acc, seqbp::Zone::Base);
  conv2_.set_accounting(acc, seqbp::Zone::Base);
  conv3_.set_accounting(acc, seqbp::Zone::Base);
  brelu1_.set_accounting(acc, seqbp::Zone::Base);
  brelu2_.set_accounting(acc, seqbp::Zone::Base);
  brelu3_.set_accounting(acc, seqbp::Zone::Base);
  fc1_.set_accounting(acc, seqbp::Zone::Region);
  fc2_.set_accounting(acc, seqbp::Zone::Region);
  nrelu1_.set_accounting(acc, seqbp::Zone::Region);
  nrelu2_.set_accounting(acc, seqbp::Zone::Region);
  if (drop_) drop_->set_accounting(acc);
  fc_f_.set_accounting(acc, seqbp::Zone::Head);
  fc_g_.set_accounting(acc, seqbp::Zone::Head);
  for (Student& s : students_) {
    s.cls.set_accounting(acc, seqbp::Zone::Head);
    s.reg.set_accounting(acc, seqbp::Zone::Head);
  }
}

void Detector::begin_iteration(const data::SyntheticScene* scene, Rng* noise_rng) {
  scene_ = scene;
  noise_rng_ = noise_rng;
  training_ = true;
  logistic_noise_.clear();
  uniform_noise_.clear();
  noise_regions_ = 0;
  if (drop_) drop_->clear_cache();
}

std::size_t Detector::num_regions() const {
  return scene_ ? scene_->proposals.boxes.size() : 0;
}

Tensor Detector::base_forward(bool cache) {
  Tensor x = conv1_.forward(scene_->image, cache);
  x = brelu1_.forward(x, cache);
  x = conv2_.forward(x, cache);
  x = brelu2_.forward(x, cache);
  x = conv3_.forward(x, cache);
  return brelu3_.forward(x, cache);
}

void Detector::base_backward(const Tensor& g_ab) {
  Tensor g = brelu3_.backward(g_ab);
  g = conv3_.backward(g);
  g = brelu2_.backward(g);
  g = conv2_.backward(g);
  g = brelu1_.backward(g);
  conv1_.backward(g);
}

void Detector::base_clear() {
  conv1_.clear_cache();
  conv2_.clear_cache();
  conv3_.clear_cache();
  brelu1_.clear_cache();
  brelu2_.clear_cache();
  brelu3_.clear_cache();
}

void Detector::ensure_noise(std::size_t end_region) {
  if (end_region <= noise_regions_) return;
  const std::size_t cells = cfg_.roi_size * cfg_.roi_size;
  if (cfg_.drop == DropMode::Concrete) {
    logistic_noise_.reserve(end_region * cells);
    for (std::size_t i = noise_regions_ * cells; i < end_region * cells; ++i)
      logistic_noise_.push_back(noise_rng_->logistic());
  } else if (cfg_.drop == DropMode::Fixed) {
    uniform_noise_.reserve(end_region * cells);
    for (std::size_t i = noise_regions_ * cells; i < end_region * cells; ++i)
      uniform_noise_.push_back(noise_rng_->uniform());
  }
  noise_regions_ = end_region;
}

Tensor Detector::pooled_forward(const Tensor& a_b, std::size_t begin, std::size_t end,
                                bool cache) {
  layers::RoiPoolOut pr = layers::roi_pool(a_b, scene_->proposals.boxes, begin, end,
                                           spatial_scale_, cfg_.roi_size);
  if (cache) {
    pool_argmax_ = std::move(pr.argmax);
    region_cached_elems_ += pool_argmax_.size();
    if (acc_) acc_->add(seqbp::Zone::Region, pool_argmax_.size());
  }
  return std::move(pr.features);
}

Tensor Detector::region_forward(const Tensor& a_b, std::size_t begin, std::size_t end,
                                bool cache) {
  Tensor x = pooled_forward(a_b, begin, end, cache);
  const std::size_t n = end - begin;
  const std::size_t cells = cfg_.roi_size * cfg_.roi_size;

  if (training_ && cfg_.drop == DropMode::Concrete) {
    ensure_noise(end);
    std::vector<double> slice(logistic_noise_.begin() +
                                  static_cast<std::ptrdiff_t>(begin * cells),
                              logistic_noise_.begin() + static_cast<std::ptrdiff_t>(end * cells));
    x = drop_->forward(x, dropblock::Mode::Train, slice, cache);
  } else if (training_ && cfg_.drop == DropMode::Fixed) {
    ensure_noise(end);
    Tensor hard{n, cfg_.roi_size, cfg_.roi_size};
    for (std::size_t i = 0; i < n * cells; ++i)
      hard[i] = uniform_noise_[begin * cells + i] < cfg_.fixed_drop_rate ? 0.0 : 1.0;
    dropblock::ExpandedMask em = dropblock::expand_and_normalize(hard, cfg_.block_size);
    Tensor dropped = dropblock::apply(x, em, true);
    if (cache) {
      fixed_mask_ = em;
      fixed_cached_pooled_ = x;
      std::size_t elems = em.mask.size() + x.size();
      region_cached_elems_ += elems;
      if (acc_) acc_->add(seqbp::Zone::Region, elems);
    }
    x = std::move(dropped);
  }

  x = x.reshaped({n, cfg_.base_c3 * cells});
  x = fc1_.forward(x, cache);
  x = nrelu1_.forward(x, cache);
  x = fc2_.forward(x, cache);
  return nrelu2_.forward(x, cache);
}

void Detector::region_backward(const Tensor& g_rows, std::size_t begin, std::size_t end,
                               Tensor& g_ab) {
  const std::size_t n = end - begin;
  const std::size_t cells = cfg_.roi_size * cfg_.roi_size;
  Tensor g = nrelu2_.backward(g_rows);
  g = fc2_.backward(g);
  g = nrelu1_.backward(g);
  g = fc1_.backward(g);
  g = g.reshaped({n, cfg_.base_c3, cfg_.roi_size, cfg_.roi_size});

  if (training_ && cfg_.drop == DropMode::Concrete) {
    g = drop_->backward(g);
  } else if (training_ && cfg_.drop == DropMode::Fixed) {
    const dropblock::ExpandedMask& em = *fixed_mask_;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t ch = 0; ch < cfg_.base_c3; ++ch) {
        double* gp = g.data() + (i * cfg_.base_c3 + ch) * cells;
        const double* m = em.mask.data() + i * cells;
        for (std::size_t j = 0; j < cells; ++j) gp[j] *= m[j] * em.norm[i];
      }
  }

  layers::roi_pool_backward(g, pool_argmax_, g_ab);
}

void Detector::region_clear() {
  fc1_.clear_cache();
  fc2_.clear_cache();
  nrelu1_.clear_cache();
  nrelu2_.clear_cache();
  if (drop_) drop_->clear_cache();
  if (acc_ && region_cached_elems_ > 0) acc_->sub(seqbp::Zone::Region, region_cached_elems_);
  region_cached_elems_ = 0;
  pool_argmax_.clear();
  fixed_mask_.reset();
  fixed_cached_pooled_ = Tensor{};
}

mist::MistParams Detector::mist_params() const {
  mist::MistParams mp;
  mp.p = cfg_.p;
  mp.tau = cfg_.mist_iou_tau;
  mp.fg_iou = cfg_.fg_iou;
  mp.top1 = cfg_.selection == SelectionMode::Top1;
  return mp;
}

seqbp::HeadLosses Detector::head_forward(const Tensor& embeddings, bool cache) {
  f_ = fc_f_.forward(embeddings, cache);
  g_ = fc_g_.forward(embeddings, cache);
  sm_ = milhead::score(f_, g_);

  seqbp::HeadLosses losses;
  const auto mode = cfg_.literal_image_loss ? milhead::ImageLossMode::Literal
                                            : milhead::ImageLossMode::BinaryCrossEntropy;
  losses.image = milhead::image_loss(sm_.phi, scene_->image_label, mode);

  blocks_.clear();
  for (Student& s : students_) {
    mist::StudentBlock blk;
    Tensor logits = s.cls.forward(embeddings, cache);
    blk.probs = milhead::softmax_rows(logits);
    blk.deltas = s.reg.forward(embeddings, cache);
    blocks_.push_back(std::move(blk));
  }

  // pseudo-labels are generated from scores treated as constants
  targets_ = mist::ensemble_chain(sm_.s_joint, blocks_, scene_->proposals, scene_->gt_classes(),
                                  mist_params(), &last_pseudo_);
  if (!cfg_.regression) {
    for (mist::RegionTargets& t : targets_) std::fill(t.has_reg.begin(), t.has_reg.end(), 0);
  }

  for (std::size_t b = 0; b < blocks_.size(); ++b)
    losses.roi_per_block.push_back(mist::student_loss(blocks_[b], targets_[b]));

  losses.total = losses.image +
                 std::accumulate(losses.roi_per_block.begin(), losses.roi_per_block.end(), 0.0);

  if (cache) {
    head_cached_elems_ = f_.size() + g_.size() + sm_.s_cls.size() + sm_.s_det.size() +
                         sm_.s_joint.size() + sm_.phi.size();
    for (const mist::StudentBlock& b : blocks_)
      head_cached_elems_ += b.probs.size() + b.deltas.size();
    if (acc_) acc_->add(seqbp::Zone::Head, head_cached_elems_);
  }
  return losses;
}

Tensor Detector::head_backward() {
  const auto mode = cfg_.literal_image_loss ? milhead::ImageLossMode::Literal
                                            : milhead::ImageLossMode::BinaryCrossEntropy;
  const std::size_t r = f_.dim(0), k = f_.dim(1);

  Tensor dphi = milhead::image_loss_grad_phi(sm_.phi, scene_->image_label, mode);
  Tensor d_joint{r, k};
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t c = 0; c < k; ++c) d_joint.at(i, c) = dphi[c];
  Tensor df, dg;
  milhead::score_backward(sm_, d_joint, df, dg);

  Tensor d_e = fc_f_.backward(df);
  Tensor d_e2 = fc_g_.backward(dg);
  kernels::axpy(1.0, d_e2.data(), d_e.data(), d_e.size());

  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    Tensor d_logits, d_deltas;
    mist::student_loss_backward(blocks_[b], targets_[b], d_logits, d_deltas);
    Tensor d = students_[b].cls.backward(d_logits);
    kernels::axpy(1.0, d.data(), d_e.data(), d_e.size());
    if (cfg_.regression) {
      Tensor dr = students_[b].reg.backward(d_deltas);
      kernels::axpy(1.0, dr.data(), d_e.data(), d_e.size());
    }
  }
  return d_e;
}

void Detector::head_clear() {
  fc_f_.clear_cache();
  fc_g_.clear_cache();
  for (Student& s : students_) {
    s.cls.clear_cache();
    s.reg.clear_cache();
  }
  if (acc_ && head_cached_elems_ > 0) acc_->sub(seqbp::Zone::Head, head_cached_elems_);
  head_cached_elems_ = 0;
  f_ = g_ = Tensor{};
  sm_ = milhead::ScoreMatrix{};
}

std::vector<layers::Param*> Detector::params() {
  std::vector<layers::Param*> out = {&conv1_.w, &conv1_.b, &conv2_.w, &conv2_.b,
                                     &conv3_.w, &conv3_.b, &fc1_.w,   &fc1_.b,
                                     &fc2_.w,   &fc2_.b,   &fc_f_.w,  &fc_f_.b,
                                     &fc_g_.w,  &fc_g_.b};
  for (Student& s : students_) {
    out.push_back(&s.cls.w);
    out.push_back(&s.cls.b);
    out.push_back(&s.reg.w);
    out.push_back(&s.reg.b);
  }
  if (drop_)
    for (layers::Param* p : drop_->params()) out.push_back(p);
  return out;
}

void Detector::zero_grads() {
  for (layers::Param* p : params()) p->zero_grad();
}

std::vector<mist::PseudoBox> Detector::pseudo_labels(const data::SyntheticScene& scene) {
  scene_ = &scene;
  training_ = false;
  Tensor a_b = base_forward(false);
  Tensor e = region_forward(a_b, 0, scene.proposals.boxes.size(), false);
  milhead::ScoreMatrix sm = milhead::score(fc_f_.forward(e, false), fc_g_.forward(e, false));
  auto cand = mist::mist_select(sm.s_joint, scene.proposals, scene.gt_classes(),
                                mist_params().top1 ? 1e-12 : cfg_.p, cfg_.mist_iou_tau);
  return mist::resolve_conflicts(cand);
}

std::vector<evalmetrics::Detection> Detector::infer(const data::SyntheticScene& scene) {
  scene_ = &scene;
  training_ = false;  // DropBlock is exactly the identity at inference
  const std::size_t n = scene.proposals.boxes.size();

  Tensor a_b = base_forward(false);
  Tensor e = region_forward(a_b, 0, n, false);

  std::vector<mist::StudentBlock> blocks;
  for (Student& s : students_) {
    mist::StudentBlock blk;
    blk.probs = milhead::softmax_rows(s.cls.forward(e, false));
    blk.deltas = s.reg.forward(e, false);
    if (!cfg_.regression) blk.deltas.zero();
    blocks.push_back(std::move(blk));
  }
  mist::AveragedPredictions avg = mist::inference_average(blocks, scene.proposals);

  std::vector<evalmetrics::Detection> dets;
  const std::size_t k = static_cast<std::size_t>(cfg_.num_classes);
  for (std::size_t c = 0; c < k; ++c) {
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t i = 0; i < n; ++i) {
      double conf = avg.scores.at(i, c);
      if (conf >= cfg_.conf_thresh) scored.emplace_back(conf, i);
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<geometry::Box> boxes;
    std::vector<double> confs;
    for (const auto& [conf, i] : scored) {
      try {
        boxes.push_back(
            geometry::clip_box(avg.boxes[i], scene.proposals.width, scene.proposals.height));
        confs.push_back(conf);
      } catch (const geometry::ZeroAreaAfterClip&) {
      }
    }
    for (std::size_t idx : geometry::greedy_diverse_select_indices(boxes, cfg_.nms_iou)) {
      dets.push_back({scene.image_id, static_cast<int>(c), boxes[idx], confs[idx]});
    }
  }
  return dets;
}

}  // namespace wsod::model
