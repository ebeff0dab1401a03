#include "wsod/milhead.hpp"

#include <cmath>
#include <stdexcept>

#include "wsod/kernels.hpp"

namespace wsod::milhead {

namespace {

void check_logits(const Tensor& f, const Tensor& g) {
  if (f.rank() != 2 || !f.same_shape(g)) throw std::invalid_argument("logit shape mismatch");
  if (!f.all_finite() || !g.all_finite()) throw std::invalid_argument("non-finite logits");
}

double clamp01(double v) {
  if (v < kLogClampEps) return kLogClampEps;
  if (v > 1.0 - kLogClampEps) return 1.0 - kLogClampEps;
  return v;
}

}  // namespace

Tensor softmax_rows(const Tensor& logits) {
  const std::size_t r = logits.dim(0), k = logits.dim(1);
  Tensor out{r, k};
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = logits.data() + i * k;
    double* orow = out.data() + i * k;
    double m = kernels::vmax(row, k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      orow[j] = std::exp(row[j] - m);
      z += orow[j];
    }
    kernels::scale(1.0 / z, orow, k);
  }
  return out;
}

Tensor softmax_cols(const Tensor& logits) {
  const std::size_t r = logits.dim(0), k = logits.dim(1);
  Tensor out{r, k};
  for (std::size_t j = 0; j < k; ++j) {
    double m = logits.at(0, j);
    for (std::size_t i = 1; i < r; ++i) m = std::max(m, logits.at(i, j));
    double z = 0.0;
    for (std::size_t i = 0; i < r; ++i) {
      double e = std::exp(logits.at(i, j) - m);
      out.at(i, j) = e;
      z += e;
    }
    for (std::size_t i = 0; i < r; ++i) out.at(i, j) /= z;
  }
  return out;
}

Tensor softmax_rows_backward(const Tensor& probs, const Tensor& dprobs) {
  const std::size_t r = probs.dim(0), k = probs.dim(1);
  Tensor dx{r, k};
  for (std::size_t i = 0; i < r; ++i) {
    const double* p = probs.data() + i * k;
    const double* dp = dprobs.data() + i * k;
    double inner = kernels::dot(dp, p, k);
    for (std::size_t j = 0; j < k; ++j) dx.at(i, j) = p[j] * (dp[j] - inner);
  }
  return dx;
}

Tensor softmax_cols_backward(const Tensor& probs, const Tensor& dprobs) {
  const std::size_t r = probs.dim(0), k = probs.dim(1);
  Tensor dx{r, k};
  for (std::size_t j = 0; j < k; ++j) {
    double inner = 0.0;
    for (std::size_t i = 0; i < r; ++i) inner += dprobs.at(i, j) * probs.at(i, j);
    for (std::size_t i = 0; i < r; ++i)
      dx.at(i, j) = probs.at(i, j) * (dprobs.at(i, j) - inner);
  }
  return dx;
}

ScoreMatrix score(const Tensor& f, const Tensor& g) {
  check_logits(f, g);
  ScoreMatrix sm;
  sm.s_cls = softmax_rows(f);
  sm.s_det = softmax_cols(g);
  sm.s_joint = Tensor{f.dim(0), f.dim(1)};
  kernels::vmul(sm.s_cls.data(), sm.s_det.data(), sm.s_joint.data(), f.size());
  sm.phi = Tensor{f.dim(1)};
  for (std::size_t i = 0; i < f.dim(0); ++i)
    kernels::axpy(1.0, sm.s_joint.data() + i * f.dim(1), sm.phi.data(), f.dim(1));
  return sm;
}

double image_loss(const Tensor& phi, const std::vector<int>& y, ImageLossMode mode) {
  double loss = 0.0;
  for (std::size_t c = 0; c < phi.size(); ++c) {
    double p = clamp01(phi[c]);
    if (y[c])
      loss -= std::log(p);
    else if (mode == ImageLossMode::BinaryCrossEntropy)
      loss -= std::log(1.0 - p);
  }
  return loss;
}

Tensor image_loss_grad_phi(const Tensor& phi, const std::vector<int>& y, ImageLossMode mode) {
  Tensor d{phi.size()};
  for (std::size_t c = 0; c < phi.size(); ++c) {
    // zero gradient where the log clamp is active
    if (phi[c] < kLogClampEps || phi[c] > 1.0 - kLogClampEps) continue;
    if (y[c])
      d[c] = -1.0 / phi[c];
    else if (mode == ImageLossMode::BinaryCrossEntropy)
      d[c] = 1.0 / (1.0 - phi[c]);
  }
  return d;
}

void score_backward(const ScoreMatrix& sm, const Tensor& d_joint, Tensor& df, Tensor& dg) {
  const std::size_t r = sm.s_cls.dim(0), k = sm.s_cls.dim(1);
  Tensor d_cls{r, k}, d_det{r, k};
  kernels::vmul(d_joint.data(), sm.s_det.data(), d_cls.data(), r * k);
  kernels::vmul(d_joint.data(), sm.s_cls.data(), d_det.data(), r * k);
  df = softmax_rows_backward(sm.s_cls, d_cls);
  dg = softmax_cols_backward(sm.s_det, d_det);
}

}  // namespace wsod::milhead
