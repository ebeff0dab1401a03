#include "wsod/kernels.hpp"

#include <stdexcept>

namespace wsod::kernels {

namespace scalar {
void axpy(double, const double*, double*, std::size_t);
double dot(const double*, const double*, std::size_t);
void scale(double, double*, std::size_t);
void vadd(const double*, const double*, double*, std::size_t);
void vmul(const double*, const double*, double*, std::size_t);
void vmul_acc(const double*, const double*, double*, std::size_t);
double vsum(const double*, std::size_t);
double vmax(const double*, std::size_t);
void relu(const double*, double*, std::size_t);
void relu_grad(const double*, const double*, double*, std::size_t);
void gemm_nn(std::size_t, std::size_t, std::size_t, const double*, const double*, double*, bool);
void gemm_tn(std::size_t, std::size_t, std::size_t, const double*, const double*, double*, bool);
void gemm_nt(std::size_t, std::size_t, std::size_t, const double*, const double*, double*, bool);
}  // namespace scalar

namespace avx2 {
void axpy(double, const double*, double*, std::size_t);
double dot(const double*, const double*, std::size_t);
void scale(double, double*, std::size_t);
void vadd(const double*, const double*, double*, std::size_t);
void vmul(const double*, const double*, double*, std::size_t);
void vmul_acc(const double*, const double*, double*, std::size_t);
double vsum(const double*, std::size_t);
double vmax(const double*, std::size_t);
void relu(const double*, double*, std::size_t);
void relu_grad(const double*, const double*, double*, std::size_t);
void gemm_nn(std::size_t, std::size_t, std::size_t, const double*, const double*, double*, bool);
void gemm_tn(std::size_t, std::size_t, std::size_t, const double*, const double*, double*, bool);
void gemm_nt(std::size_t, std::size_t, std::size_t, const double*, const double*, double*, bool);
}  // namespace avx2

bool avx2_supported() {
#if defined(WSOD_NO_AVX2)
  return false;
#elif defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {
Backend detect() { return avx2_supported() ? Backend::Avx2 : Backend::Scalar; }
Backend g_backend = detect();
}  // namespace

Backend active_backend() { return g_backend; }

void set_backend(Backend b) {
  if (b == Backend::Avx2 && !avx2_supported())
    throw std::runtime_error("AVX2 backend requested but not supported on this CPU");
  g_backend = b;
}

#define WSOD_DISPATCH(fn, ...)                          \
  if (g_backend == Backend::Avx2) return avx2::fn(__VA_ARGS__); \
  return scalar::fn(__VA_ARGS__)

void axpy(double a, const double* x, double* y, std::size_t n) { WSOD_DISPATCH(axpy, a, x, y, n); }
double dot(const double* a, const double* b, std::size_t n) { WSOD_DISPATCH(dot, a, b, n); }
void scale(double a, double* x, std::size_t n) { WSOD_DISPATCH(scale, a, x, n); }
void vadd(const double* a, const double* b, double* o, std::size_t n) { WSOD_DISPATCH(vadd, a, b, o, n); }
void vmul(const double* a, const double* b, double* o, std::size_t n) { WSOD_DISPATCH(vmul, a, b, o, n); }
void vmul_acc(const double* a, const double* b, double* o, std::size_t n) { WSOD_DISPATCH(vmul_acc, a, b, o, n); }
double vsum(const double* x, std::size_t n) { WSOD_DISPATCH(vsum, x, n); }
double vmax(const double* x, std::size_t n) { WSOD_DISPATCH(vmax, x, n); }
void relu(const double* x, double* y, std::size_t n) { WSOD_DISPATCH(relu, x, y, n); }
void relu_grad(const double* x, const double* gy, double* gx, std::size_t n) {
  WSOD_DISPATCH(relu_grad, x, gy, gx, n);
}
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool acc) {
  WSOD_DISPATCH(gemm_nn, m, n, k, a, b, c, acc);
}
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool acc) {
  WSOD_DISPATCH(gemm_tn, m, n, k, a, b, c, acc);
}
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
             double* c, bool acc) {
  WSOD_DISPATCH(gemm_nt, m, n, k, a, b, c, acc);
}

#undef WSOD_DISPATCH

}  // namespace wsod::kernels
