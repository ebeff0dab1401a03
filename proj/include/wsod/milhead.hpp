#pragma once

#include <vector>

#include "wsod/tensor.hpp"

namespace wsod::milhead {

// Per-image score matrices of the two-branch MIL head. f scores regions as
// categories (normalized over classes), g ranks regions per category
// (normalized over regions); their product is the joint score and phi is
// the per-class image evidence.
struct ScoreMatrix {
  Tensor s_cls;    // R×K, rows sum to 1
  Tensor s_det;    // R×K, columns sum to 1
  Tensor s_joint;  // R×K, elementwise product
  Tensor phi;      // K
};

ScoreMatrix score(const Tensor& f, const Tensor& g);

enum class ImageLossMode { BinaryCrossEntropy, Literal };

inline constexpr double kLogClampEps = 1e-8;

// y is the 0/1 image label vector. Literal mode keeps only the positive
// term; binary CE adds the absent-class term.
double image_loss(const Tensor& phi, const std::vector<int>& y, ImageLossMode mode);
Tensor image_loss_grad_phi(const Tensor& phi, const std::vector<int>& y, ImageLossMode mode);

// Backprop d(loss)/d(s_joint) to the two logit matrices.
void score_backward(const ScoreMatrix& sm, const Tensor& d_joint, Tensor& df, Tensor& dg);

// Shared softmax helpers (max-subtracted). Used by the teacher branches and
// the student classification rows.
Tensor softmax_rows(const Tensor& logits);
Tensor softmax_cols(const Tensor& logits);
// dlogits for y = softmax(rows(x)): rows independent
Tensor softmax_rows_backward(const Tensor& probs, const Tensor& dprobs);
Tensor softmax_cols_backward(const Tensor& probs, const Tensor& dprobs);

}  // namespace wsod::milhead
