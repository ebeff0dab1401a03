#pragma once

#include <cstddef>

// Low-level numeric kernels. Every entry point has a scalar reference
// implementation and an AVX2 variant; the active backend is picked at
// runtime from CPU features and can be forced for equivalence testing.
namespace wsod::kernels {

enum class Backend { Scalar, Avx2 };

bool avx2_supported();
Backend active_backend();
void set_backend(Backend b);  // throws if unsupported on this CPU

// y += a * x
void axpy(double a, const double* x, double* y, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
void scale(double a, double* x, std::size_t n);
void vadd(const double* a, const double* b, double* out, std::size_t n);
void vmul(const double* a, const double* b, double* out, std::size_t n);
// out += a ⊙ b
void vmul_acc(const double* a, const double* b, double* out, std::size_t n);
double vsum(const double* x, std::size_t n);
double vmax(const double* x, std::size_t n);
void relu(const double* x, double* y, std::size_t n);
// gx += gy where x > 0
void relu_grad(const double* x, const double* gy, double* gx, std::size_t n);

// Row-major GEMM family. C is M×N. When accumulate is false C is
// overwritten, otherwise summed into. Accumulation order over k is fixed
// (ascending) so that chunked row-range accumulation reproduces the
// full-batch result bit for bit.
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a,
             const double* b, double* c, bool accumulate);
// C += A^T * B with A stored K×M row-major
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a,
             const double* b, double* c, bool accumulate);
// C += A * B^T with B stored N×K row-major
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a,
             const double* b, double* c, bool accumulate);

}  // namespace wsod::kernels
