#include "wsod/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "wsod/kernels.hpp"

namespace wsod::layers {

void Layer::note_cached(std::size_t elems) {
  if (acc_) acc_->add(zone_, elems);
}
void Layer::note_cleared(std::size_t elems) {
  if (acc_) acc_->sub(zone_, elems);
}

namespace {

// im2col for one CHW sample: col is (c*k*k) × (ho*wo)
void im2col(const double* x, std::size_t c, std::size_t h, std::size_t w, std::size_t k,
            std::size_t stride, std::size_t pad, std::size_t ho, std::size_t wo, double* col) {
  const std::size_t cols = ho * wo;
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t ky = 0; ky < k; ++ky)
      for (std::size_t kx = 0; kx < k; ++kx) {
        double* dst = col + ((ch * k + ky) * k + kx) * cols;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                              static_cast<std::ptrdiff_t>(pad);
          for (std::size_t ox = 0; ox < wo; ++ox) {
            std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                static_cast<std::ptrdiff_t>(pad);
            double v = 0.0;
            if (iy >= 0 && iy < static_cast<std::ptrdiff_t>(h) && ix >= 0 &&
                ix < static_cast<std::ptrdiff_t>(w))
              v = x[(ch * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix)];
            dst[oy * wo + ox] = v;
          }
        }
      }
}

void col2im_acc(const double* col, std::size_t c, std::size_t h, std::size_t w, std::size_t k,
                std::size_t stride, std::size_t pad, std::size_t ho, std::size_t wo, double* x) {
  const std::size_t cols = ho * wo;
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t ky = 0; ky < k; ++ky)
      for (std::size_t kx = 0; kx < k; ++kx) {
        const double* src = col + ((ch * k + ky) * k + kx) * cols;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                              static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * stride + kx) -
                                static_cast<std::ptrdiff_t>(pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            x[(ch * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix)] +=
                src[oy * wo + ox];
          }
        }
      }
}

std::size_t conv_out(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad) {
  return (in + 2 * pad - k) / stride + 1;
}

void fill_gaussian(Tensor& t, Rng& rng, double stddev) {
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal() * stddev;
}

}  // namespace

Conv2d::Conv2d(std::string name, std::size_t c_in, std::size_t c_out, std::size_t ksize,
               std::size_t stride, std::size_t pad)
    : c_in_(c_in), c_out_(c_out), k_(ksize), stride_(stride), pad_(pad) {
  w.name = name + ".w";
  b.name = name + ".b";
  w.value = Tensor{c_out, c_in * ksize * ksize};
  w.grad = Tensor::zeros_like(w.value);
  b.value = Tensor{c_out};
  b.grad = Tensor::zeros_like(b.value);
}

void Conv2d::init_he(Rng& rng) {
  fill_gaussian(w.value, rng, std::sqrt(2.0 / static_cast<double>(c_in_ * k_ * k_)));
  b.value.zero();
}
void Conv2d::init_gaussian(Rng& rng, double stddev) {
  fill_gaussian(w.value, rng, stddev);
  b.value.zero();
}
void Conv2d::init_zero() {
  w.value.zero();
  b.value.zero();
}
void Conv2d::set_bias(double v) { b.value.fill(v); }

Tensor Conv2d::forward(const Tensor& x, bool cache) {
  const bool batched = x.rank() == 4;
  const std::size_t n = batched ? x.dim(0) : 1;
  const std::size_t h = x.dim(batched ? 2 : 1), w_in = x.dim(batched ? 3 : 2);
  if (x.dim(batched ? 1 : 0) != c_in_) throw std::invalid_argument("conv channel mismatch");
  const std::size_t ho = conv_out(h, k_, stride_, pad_), wo = conv_out(w_in, k_, stride_, pad_);

  Tensor y = batched ? Tensor{n, c_out_, ho, wo} : Tensor{c_out_, ho, wo};
  Tensor col{c_in_ * k_ * k_, ho * wo};
  const std::size_t in_stride = c_in_ * h * w_in, out_stride = c_out_ * ho * wo;
  for (std::size_t i = 0; i < n; ++i) {
    im2col(x.data() + i * in_stride, c_in_, h, w_in, k_, stride_, pad_, ho, wo, col.data());
    double* yp = y.data() + i * out_stride;
    kernels::gemm_nn(c_out_, ho * wo, c_in_ * k_ * k_, w.value.data(), col.data(), yp, false);
    for (std::size_t oc = 0; oc < c_out_; ++oc) {
      double bias = b.value[oc];
      double* row = yp + oc * ho * wo;
      for (std::size_t j = 0; j < ho * wo; ++j) row[j] += bias;
    }
  }
  if (cache) {
    cached_input_ = x;
    note_cached(cached_input_.size());
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& gy) {
  if (cached_input_.empty()) throw std::logic_error("conv backward without cached forward");
  const Tensor& x = cached_input_;
  const bool batched = x.rank() == 4;
  const std::size_t n = batched ? x.dim(0) : 1;
  const std::size_t h = x.dim(batched ? 2 : 1), w_in = x.dim(batched ? 3 : 2);
  const std::size_t ho = conv_out(h, k_, stride_, pad_), wo = conv_out(w_in, k_, stride_, pad_);

  Tensor gx = Tensor::zeros_like(x);
  Tensor col{c_in_ * k_ * k_, ho * wo};
  Tensor dcol{c_in_ * k_ * k_, ho * wo};
  const std::size_t in_stride = c_in_ * h * w_in, out_stride = c_out_ * ho * wo;
  for (std::size_t i = 0; i < n; ++i) {
    const double* gyp = gy.data() + i * out_stride;
    im2col(x.data() + i * in_stride, c_in_, h, w_in, k_, stride_, pad_, ho, wo, col.data());
    kernels::gemm_nt(c_out_, c_in_ * k_ * k_, ho * wo, gyp, col.data(), w.grad.data(), true);
    for (std::size_t oc = 0; oc < c_out_; ++oc)
      b.grad[oc] += kernels::vsum(gyp + oc * ho * wo, ho * wo);
    kernels::gemm_tn(c_in_ * k_ * k_, ho * wo, c_out_, w.value.data(), gyp, dcol.data(), false);
    col2im_acc(dcol.data(), c_in_, h, w_in, k_, stride_, pad_, ho, wo,
               gx.data() + i * in_stride);
  }
  return gx;
}

void Conv2d::clear_cache() {
  if (!cached_input_.empty()) {
    note_cleared(cached_input_.size());
    cached_input_ = Tensor{};
  }
}

Linear::Linear(std::string name, std::size_t d_in, std::size_t d_out)
    : d_in_(d_in), d_out_(d_out) {
  w.name = name + ".w";
  b.name = name + ".b";
  w.value = Tensor{d_out, d_in};
  w.grad = Tensor::zeros_like(w.value);
  b.value = Tensor{d_out};
  b.grad = Tensor::zeros_like(b.value);
}

void Linear::init_he(Rng& rng) {
  fill_gaussian(w.value, rng, std::sqrt(2.0 / static_cast<double>(d_in_)));
  b.value.zero();
}
void Linear::init_gaussian(Rng& rng, double stddev) {
  fill_gaussian(w.value, rng, stddev);
  b.value.zero();
}

Tensor Linear::forward(const Tensor& x, bool cache) {
  if (x.dim(1) != d_in_) throw std::invalid_argument("linear input dim mismatch");
  const std::size_t n = x.dim(0);
  Tensor y{n, d_out_};
  kernels::gemm_nt(n, d_out_, d_in_, x.data(), w.value.data(), y.data(), false);
  for (std::size_t i = 0; i < n; ++i)
    kernels::axpy(1.0, b.value.data(), y.data() + i * d_out_, d_out_);
  if (cache) {
    cached_input_ = x;
    note_cached(cached_input_.size());
  }
  return y;
}

Tensor Linear::backward(const Tensor& gy) {
  if (cached_input_.empty()) throw std::logic_error("linear backward without cached forward");
  const Tensor& x = cached_input_;
  const std::size_t n = x.dim(0);
  kernels::gemm_tn(d_out_, d_in_, n, gy.data(), x.data(), w.grad.data(), true);
  for (std::size_t i = 0; i < n; ++i)
    kernels::axpy(1.0, gy.data() + i * d_out_, b.grad.data(), d_out_);
  Tensor gx{n, d_in_};
  kernels::gemm_nn(n, d_in_, d_out_, gy.data(), w.value.data(), gx.data(), false);
  return gx;
}

void Linear::clear_cache() {
  if (!cached_input_.empty()) {
    note_cleared(cached_input_.size());
    cached_input_ = Tensor{};
  }
}

Tensor ReLU::forward(const Tensor& x, bool cache) {
  Tensor y = Tensor::zeros_like(x);
  kernels::relu(x.data(), y.data(), x.size());
  if (cache) {
    cached_input_ = x;
    note_cached(cached_input_.size());
  }
  return y;
}

Tensor ReLU::backward(const Tensor& gy) {
  if (cached_input_.empty()) throw std::logic_error("relu backward without cached forward");
  Tensor gx = Tensor::zeros_like(gy);
  kernels::relu_grad(cached_input_.data(), gy.data(), gx.data(), gy.size());
  return gx;
}

void ReLU::clear_cache() {
  if (!cached_input_.empty()) {
    note_cleared(cached_input_.size());
    cached_input_ = Tensor{};
  }
}

RoiPoolOut roi_pool(const Tensor& fmap, const std::vector<geometry::Box>& boxes,
                    std::size_t begin, std::size_t end, double spatial_scale,
                    std::size_t out_size) {
  const std::size_t c = fmap.dim(0), h = fmap.dim(1), w = fmap.dim(2);
  const std::size_t n = end - begin;
  const std::size_t s = out_size;
  RoiPoolOut out;
  out.features = Tensor{n, c, s, s};
  out.argmax.assign(n * c * s * s, -1);

  for (std::size_t i = 0; i < n; ++i) {
    const geometry::Box& bx = boxes[begin + i];
    auto x0 = static_cast<std::ptrdiff_t>(std::floor(bx.x1 * spatial_scale));
    auto y0 = static_cast<std::ptrdiff_t>(std::floor(bx.y1 * spatial_scale));
    auto x1 = static_cast<std::ptrdiff_t>(std::ceil(bx.x2 * spatial_scale));
    auto y1 = static_cast<std::ptrdiff_t>(std::ceil(bx.y2 * spatial_scale));
    x0 = std::clamp<std::ptrdiff_t>(x0, 0, static_cast<std::ptrdiff_t>(w) - 1);
    y0 = std::clamp<std::ptrdiff_t>(y0, 0, static_cast<std::ptrdiff_t>(h) - 1);
    x1 = std::clamp<std::ptrdiff_t>(x1, x0 + 1, static_cast<std::ptrdiff_t>(w));
    y1 = std::clamp<std::ptrdiff_t>(y1, y0 + 1, static_cast<std::ptrdiff_t>(h));
    const double rw = static_cast<double>(x1 - x0), rh = static_cast<double>(y1 - y0);

    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* plane = fmap.data() + ch * h * w;
      for (std::size_t py = 0; py < s; ++py) {
        auto hs = y0 + static_cast<std::ptrdiff_t>(std::floor(rh * py / s));
        auto he = y0 + static_cast<std::ptrdiff_t>(std::ceil(rh * (py + 1) / s));
        he = std::max(he, hs + 1);
        for (std::size_t px = 0; px < s; ++px) {
          auto ws = x0 + static_cast<std::ptrdiff_t>(std::floor(rw * px / s));
          auto we = x0 + static_cast<std::ptrdiff_t>(std::ceil(rw * (px + 1) / s));
          we = std::max(we, ws + 1);
          double best = -std::numeric_limits<double>::infinity();
          std::int64_t best_idx = -1;
          for (auto yy = hs; yy < he; ++yy)
            for (auto xx = ws; xx < we; ++xx) {
              double v = plane[yy * static_cast<std::ptrdiff_t>(w) + xx];
              if (v > best) {
                best = v;
                best_idx = static_cast<std::int64_t>(ch * h * w) +
                           yy * static_cast<std::ptrdiff_t>(w) + xx;
              }
            }
          out.features.at(i, ch, py, px) = best;
          out.argmax[((i * c + ch) * s + py) * s + px] = best_idx;
        }
      }
    }
  }
  return out;
}

void roi_pool_backward(const Tensor& gout, const std::vector<std::int64_t>& argmax,
                       Tensor& gmap) {
  for (std::size_t i = 0; i < gout.size(); ++i) {
    std::int64_t idx = argmax[i];
    if (idx >= 0) gmap.data()[idx] += gout.data()[i];
  }
}

}  // namespace wsod::layers
