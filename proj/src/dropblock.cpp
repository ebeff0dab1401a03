#include "wsod/dropblock.hpp"

#include <cmath>
#include <stdexcept>

#include "wsod/kernels.hpp"

namespace wsod::dropblock {

namespace {
constexpr double kProbEps = 1e-12;

double logit(double p) {
  p = std::clamp(p, kProbEps, 1.0 - kProbEps);
  return std::log(p / (1.0 - p));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

void sample_logistic_noise(std::vector<double>& out, std::size_t n, Rng& rng) {
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = rng.logistic();
}

GumbelMask gumbel_hard_mask(const Tensor& prob, double temperature,
                            const std::vector<double>& noise) {
  if (temperature <= 0.0) throw std::invalid_argument("temperature must be positive");
  if (noise.size() < prob.size()) throw std::invalid_argument("noise buffer too small");
  GumbelMask m;
  m.hard = Tensor::zeros_like(prob);
  m.soft = Tensor::zeros_like(prob);
  for (std::size_t i = 0; i < prob.size(); ++i) {
    double p = prob[i];
    if (p <= 0.0) {
      m.hard[i] = 1.0;
      m.soft[i] = 1.0;
      continue;
    }
    if (p >= 1.0) {
      m.hard[i] = 0.0;
      m.soft[i] = 0.0;
      continue;
    }
    double z = logit(p) + noise[i];
    m.hard[i] = z > 0.0 ? 0.0 : 1.0;       // drop iff the relaxed sample favors drop
    m.soft[i] = sigmoid(-z / temperature); // relaxed keep value
  }
  return m;
}

ExpandedMask expand_and_normalize(const Tensor& hard, std::size_t block_size) {
  const std::size_t n = hard.dim(0), h = hard.dim(1), w = hard.dim(2);
  if (block_size % 2 == 0 || block_size > h || block_size > w)
    throw std::invalid_argument("block_size must be odd and fit the map");
  const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(block_size) / 2;
  ExpandedMask em;
  em.mask = Tensor{n, h, w};
  em.norm.assign(n, 1.0);
  em.degenerate.assign(n, 0);
  const double area = static_cast<double>(h * w);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t survivors = 0;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        double keep = 1.0;
        for (std::ptrdiff_t dy = -r; dy <= r && keep > 0.0; ++dy) {
          std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y) + dy;
          if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
            std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(x) + dx;
            if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(w)) continue;
            if (hard.at(i, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx)) == 0.0) {
              keep = 0.0;
              break;
            }
          }
        }
        em.mask.at(i, y, x) = keep;
        if (keep > 0.0) ++survivors;
      }
    if (survivors == 0) {
      em.degenerate[i] = 1;
      em.norm[i] = area;  // capped
    } else {
      em.norm[i] = area / static_cast<double>(survivors);
    }
  }
  return em;
}

Tensor apply(const Tensor& rois, const ExpandedMask& em, bool training) {
  if (!training) return rois;
  const std::size_t n = rois.dim(0), c = rois.dim(1), h = rois.dim(2), w = rois.dim(3);
  Tensor out = Tensor::zeros_like(rois);
  for (std::size_t i = 0; i < n; ++i) {
    const double* m = em.mask.data() + i * h * w;
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* src = rois.data() + (i * c + ch) * h * w;
      double* dst = out.data() + (i * c + ch) * h * w;
      kernels::vmul(src, m, dst, h * w);
      kernels::scale(em.norm[i], dst, h * w);
    }
  }
  return out;
}

ConcreteDropBlock::ConcreteDropBlock(std::size_t c_in, const DropBlockParams& params)
    : params_(params),
      main1_("drop.main1", c_in, params.hidden, 3, 1, 1),
      main2_("drop.main2", params.hidden, 1, 3, 1, 1),
      skip_("drop.skip", c_in, 1, 1, 1, 0) {
  for (layers::Param* p : params()) p->adversarial = true;
}

std::vector<layers::Param*> ConcreteDropBlock::params() {
  return {&main1_.w, &main1_.b, &main2_.w, &main2_.b, &skip_.w, &skip_.b};
}

void ConcreteDropBlock::init(Rng& rng) {
  main1_.init_he(rng);
  main2_.init_zero();  // heatmap starts as the skip projection alone
  skip_.init_gaussian(rng, 0.1);
  skip_.set_bias(-2.0);  // initial p ≈ 0.12, below the clamp so theta trains
}

void ConcreteDropBlock::set_accounting(seqbp::MemoryAccountant* acc) {
  acc_ = acc;
  main1_.set_accounting(acc, seqbp::Zone::Region);
  main2_.set_accounting(acc, seqbp::Zone::Region);
  skip_.set_accounting(acc, seqbp::Zone::Region);
  relu_.set_accounting(acc, seqbp::Zone::Region);
}

Tensor ConcreteDropBlock::prob_map(const Tensor& rois, bool cache) {
  Tensor a = main1_.forward(rois, cache);
  Tensor b = relu_.forward(a, cache);
  Tensor main_out = main2_.forward(b, cache);
  Tensor skip_out = skip_.forward(rois, cache);
  const std::size_t n = rois.dim(0), h = rois.dim(2), w = rois.dim(3);
  Tensor logits{n, h, w};
  kernels::vadd(main_out.data(), skip_out.data(), logits.data(), logits.size());
  Tensor p{n, h, w};
  for (std::size_t i = 0; i < p.size(); ++i)
    p[i] = std::min(sigmoid(logits[i]), params_.clamp_tau);
  if (cache) {
    logits_ = logits;
    p_raw_ = Tensor{n, h, w};
    for (std::size_t i = 0; i < p.size(); ++i) p_raw_[i] = sigmoid(logits[i]);
    p_clamped_ = p;
  }
  return p;
}

Tensor ConcreteDropBlock::forward(const Tensor& rois, Mode mode,
                                  const std::vector<double>& noise, bool cache) {
  mode_ = mode;
  soft_expanded_ = Tensor{};
  if (mode == Mode::Inference) return rois;

  Tensor p = prob_map(rois, cache);
  GumbelMask gm = gumbel_hard_mask(p, params_.temperature, noise);
  ExpandedMask em = expand_and_normalize(gm.hard, params_.block_size);
  for (char d : em.degenerate)
    if (d) ++degenerate_count_;

  const std::size_t n = rois.dim(0), h = rois.dim(2), w = rois.dim(3);
  Tensor out;
  if (mode == Mode::Train) {
    out = apply(rois, em, true);
  } else {  // SoftRelax: fully soft expansion, no rescale
    soft_expanded_ = Tensor{n, h, w};
    const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(params_.block_size) / 2;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          double prod = 1.0;
          for (std::ptrdiff_t dy = -r; dy <= r; ++dy)
            for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
              std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y) + dy;
              std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(x) + dx;
              if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(h) || xx < 0 ||
                  xx >= static_cast<std::ptrdiff_t>(w))
                continue;
              prod *= gm.soft.at(i, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
            }
          soft_expanded_.at(i, y, x) = prod;
        }
    out = Tensor::zeros_like(rois);
    const std::size_t c = rois.dim(1);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t ch = 0; ch < c; ++ch)
        kernels::vmul(rois.data() + (i * c + ch) * h * w, soft_expanded_.data() + i * h * w,
                      out.data() + (i * c + ch) * h * w, h * w);
  }

  if (cache) {
    rois_ = rois;
    soft_keep_ = gm.soft;
    hard_keep_ = gm.hard;
    expanded_ = em;
    noise_.assign(noise.begin(), noise.begin() + static_cast<std::ptrdiff_t>(p.size()));
    cached_elems_ = rois_.size() + logits_.size() + p_raw_.size() + p_clamped_.size() +
                    soft_keep_.size() + hard_keep_.size() + expanded_.mask.size() +
                    noise_.size() + soft_expanded_.size();
    if (acc_) acc_->add(seqbp::Zone::Region, cached_elems_);
  }
  return out;
}

Tensor ConcreteDropBlock::backward(const Tensor& gy) {
  if (mode_ == Mode::Inference) return gy;
  if (rois_.empty()) throw std::logic_error("dropblock backward without cached forward");
  const std::size_t n = rois_.dim(0), c = rois_.dim(1), h = rois_.dim(2), w = rois_.dim(3);
  const bool soft_mode = mode_ == Mode::SoftRelax;

  // d loss / d expanded-mask cell, and the direct path into the features
  Tensor g_mask{n, h, w};
  Tensor g_rois = Tensor::zeros_like(rois_);
  for (std::size_t i = 0; i < n; ++i) {
    double norm = soft_mode ? 1.0 : expanded_.norm[i];
    const double* mp = soft_mode ? soft_expanded_.data() + i * h * w
                                 : expanded_.mask.data() + i * h * w;
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* roi = rois_.data() + (i * c + ch) * h * w;
      const double* g = gy.data() + (i * c + ch) * h * w;
      double* gm_row = g_mask.data() + i * h * w;
      double* gr = g_rois.data() + (i * c + ch) * h * w;
      for (std::size_t j = 0; j < h * w; ++j) {
        gm_row[j] += norm * roi[j] * g[j];
        gr[j] += norm * mp[j] * g[j];
      }
    }
  }

  // through the block expansion to the per-cell soft keep values
  Tensor g_soft{n, h, w};
  const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(params_.block_size) / 2;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        double g = g_mask.at(i, y, x);
        if (g == 0.0) continue;
        for (std::ptrdiff_t dy = -r; dy <= r; ++dy)
          for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
            std::ptrdiff_t uy = static_cast<std::ptrdiff_t>(y) + dy;
            std::ptrdiff_t ux = static_cast<std::ptrdiff_t>(x) + dx;
            if (uy < 0 || uy >= static_cast<std::ptrdiff_t>(h) || ux < 0 ||
                ux >= static_cast<std::ptrdiff_t>(w))
              continue;
            // product over the window excluding u
            double prod = 1.0;
            for (std::ptrdiff_t vy = -r; vy <= r; ++vy)
              for (std::ptrdiff_t vx = -r; vx <= r; ++vx) {
                std::ptrdiff_t wy = static_cast<std::ptrdiff_t>(y) + vy;
                std::ptrdiff_t wx = static_cast<std::ptrdiff_t>(x) + vx;
                if (wy < 0 || wy >= static_cast<std::ptrdiff_t>(h) || wx < 0 ||
                    wx >= static_cast<std::ptrdiff_t>(w) || (wy == uy && wx == ux))
                  continue;
                prod *= soft_keep_.at(i, static_cast<std::size_t>(wy),
                                      static_cast<std::size_t>(wx));
              }
            g_soft.at(i, static_cast<std::size_t>(uy), static_cast<std::size_t>(ux)) += g * prod;
          }
      }

  // soft keep -> heatmap logits (through the temperature-scaled logistic,
  // the probability logit, and the clamp)
  Tensor g_logits{n, h, w};
  for (std::size_t i = 0; i < g_logits.size(); ++i) {
    double p = p_clamped_[i];
    if (p <= 0.0 || p >= 1.0) continue;
    if (p_raw_[i] >= params_.clamp_tau) continue;  // clamp active: no gradient to theta
    double z = (logit(p) + noise_[i]) / params_.temperature;
    double soft_drop = sigmoid(z);
    double d_soft_keep_dz = -soft_drop * (1.0 - soft_drop);
    double dz_dp = 1.0 / (params_.temperature * p * (1.0 - p));
    double dp_dlogit = p_raw_[i] * (1.0 - p_raw_[i]);
    g_logits[i] = g_soft[i] * d_soft_keep_dz * dz_dp * dp_dlogit;
  }

  // residual block backward: logits = main2(relu(main1(x))) + skip(x)
  Tensor g_logits4{n, 1, h, w};
  std::copy(g_logits.data(), g_logits.data() + g_logits.size(), g_logits4.data());
  Tensor g_b = main2_.backward(g_logits4);
  Tensor g_a = relu_.backward(g_b);
  Tensor g_main_in = main1_.backward(g_a);
  Tensor g_skip_in = skip_.backward(g_logits4);
  kernels::axpy(1.0, g_main_in.data(), g_rois.data(), g_rois.size());
  kernels::axpy(1.0, g_skip_in.data(), g_rois.data(), g_rois.size());
  return g_rois;
}

void ConcreteDropBlock::clear_cache() {
  main1_.clear_cache();
  main2_.clear_cache();
  skip_.clear_cache();
  relu_.clear_cache();
  if (cached_elems_ > 0 && acc_) acc_->sub(seqbp::Zone::Region, cached_elems_);
  cached_elems_ = 0;
  rois_ = logits_ = p_raw_ = p_clamped_ = soft_keep_ = hard_keep_ = Tensor{};
  soft_expanded_ = Tensor{};
  expanded_ = ExpandedMask{};
  noise_.clear();
}

}  // namespace wsod::dropblock
