#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wsod/accounting.hpp"
#include "wsod/geometry.hpp"
#include "wsod/rng.hpp"
#include "wsod/tensor.hpp"

namespace wsod::layers {

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  bool adversarial = false;  // updated by ascent instead of descent

  void zero_grad() { grad.zero(); }
};

// Layers cache what their backward needs when forward(..., cache=true) is
// called, and report those retained elements to the attached accountant.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual void clear_cache() = 0;
  virtual std::vector<Param*> params() { return {}; }

  void set_accounting(seqbp::MemoryAccountant* acc, seqbp::Zone zone) {
    acc_ = acc;
    zone_ = zone;
  }

 protected:
  void note_cached(std::size_t elems);
  void note_cleared(std::size_t elems);
  seqbp::MemoryAccountant* acc_ = nullptr;
  seqbp::Zone zone_ = seqbp::Zone::Base;
};

// 2D convolution over NCHW batches (N=1 for the image stage). Backward
// recomputes the im2col buffer from the cached input instead of retaining it.
class Conv2d : public Layer {
 public:
  Conv2d(std::string name, std::size_t c_in, std::size_t c_out, std::size_t ksize,
         std::size_t stride, std::size_t pad);

  void init_he(Rng& rng);
  void init_gaussian(Rng& rng, double stddev);
  void init_zero();
  void set_bias(double v);

  Tensor forward(const Tensor& x, bool cache);
  Tensor backward(const Tensor& gy);  // accumulates into w.grad/b.grad
  void clear_cache() override;
  std::vector<Param*> params() override { return {&w, &b}; }

  std::size_t c_in() const { return c_in_; }
  std::size_t c_out() const { return c_out_; }

  Param w;  // (c_out, c_in*k*k)
  Param b;  // (c_out)

 private:
  std::size_t c_in_, c_out_, k_, stride_, pad_;
  Tensor cached_input_;
};

class Linear : public Layer {
 public:
  Linear(std::string name, std::size_t d_in, std::size_t d_out);

  void init_he(Rng& rng);
  void init_gaussian(Rng& rng, double stddev);

  Tensor forward(const Tensor& x, bool cache);  // x: N×d_in
  Tensor backward(const Tensor& gy);
  void clear_cache() override;
  std::vector<Param*> params() override { return {&w, &b}; }

  Param w;  // (d_out, d_in)
  Param b;  // (d_out)

 private:
  std::size_t d_in_, d_out_;
  Tensor cached_input_;
};

class ReLU : public Layer {
 public:
  Tensor forward(const Tensor& x, bool cache);
  Tensor backward(const Tensor& gy);
  void clear_cache() override;

 private:
  Tensor cached_input_;
};

// ROI max pooling from a (C,Hf,Wf) feature map into (N,C,S,S) with argmax
// indices kept for the backward scatter. Boxes are in image pixels.
struct RoiPoolOut {
  Tensor features;                  // (N,C,S,S)
  std::vector<std::int64_t> argmax; // flat index into the feature map, -1 if empty
};

RoiPoolOut roi_pool(const Tensor& fmap, const std::vector<geometry::Box>& boxes,
                    std::size_t begin, std::size_t end, double spatial_scale,
                    std::size_t out_size);
// Scatter-add gout into gmap (same shape as the pooled-from feature map),
// ascending output order so accumulation is reproducible.
void roi_pool_backward(const Tensor& gout, const std::vector<std::int64_t>& argmax, Tensor& gmap);

}  // namespace wsod::layers
