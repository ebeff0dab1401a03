#include "wsod/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wsod {

Tensor::Tensor(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
  if (dims_.empty() || dims_.size() > 4) throw std::invalid_argument("tensor rank must be 1..4");
  std::size_t n = 1;
  for (std::size_t d : dims_) n *= d;
  data_.assign(n, 0.0);
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

std::size_t Tensor::row_elems() const {
  std::size_t n = 1;
  for (std::size_t i = 1; i < dims_.size(); ++i) n *= dims_[i];
  return n;
}

Tensor Tensor::reshaped(std::vector<std::size_t> new_dims) const {
  Tensor out(std::move(new_dims));
  if (out.size() != size()) throw std::invalid_argument("reshape size mismatch");
  std::copy(data_.begin(), data_.end(), out.data_.begin());
  return out;
}

Tensor Tensor::rows(std::size_t begin, std::size_t end) const {
  if (begin > end || end > dims_[0]) throw std::out_of_range("row slice out of range");
  std::vector<std::size_t> d = dims_;
  d[0] = end - begin;
  Tensor out(d);
  std::size_t stride = row_elems();
  std::copy(data_.begin() + begin * stride, data_.begin() + end * stride, out.data_.begin());
  return out;
}

}  // namespace wsod
