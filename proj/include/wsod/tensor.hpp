#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace wsod {

// Dense row-major double tensor, rank 1..4. Small and value-semantic; all
// heavy arithmetic goes through kernels.hpp on raw pointers.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims);
  Tensor(std::initializer_list<std::size_t> dims)
      : Tensor(std::vector<std::size_t>(dims)) {}

  static Tensor zeros_like(const Tensor& t) { return Tensor(t.dims_); }

  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  std::size_t dim(std::size_t i) const { return dims_[i]; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // 2D (r,c)
  double& at(std::size_t r, std::size_t c) { return data_[r * dims_[1] + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * dims_[1] + c]; }
  // 3D (c,h,w)
  double& at(std::size_t c, std::size_t h, std::size_t w) {
    return data_[(c * dims_[1] + h) * dims_[2] + w];
  }
  double at(std::size_t c, std::size_t h, std::size_t w) const {
    return data_[(c * dims_[1] + h) * dims_[2] + w];
  }
  // 4D (n,c,h,w)
  double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((n * dims_[1] + c) * dims_[2] + h) * dims_[3] + w];
  }
  double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[((n * dims_[1] + c) * dims_[2] + h) * dims_[3] + w];
  }

  void fill(double v);
  void zero() { fill(0.0); }
  bool same_shape(const Tensor& other) const { return dims_ == other.dims_; }
  bool all_finite() const;

  // Rows [begin,end) of a tensor whose first dimension indexes rows.
  Tensor rows(std::size_t begin, std::size_t end) const;
  std::size_t row_elems() const;  // elements per leading-dim slice

  // Same data, new dims (sizes must agree).
  Tensor reshaped(std::vector<std::size_t> new_dims) const;

 private:
  std::vector<std::size_t> dims_;
  std::vector<double> data_;
};

}  // namespace wsod
