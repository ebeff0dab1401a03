#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <vector>

#include "testutil.hpp"
#include "wsod/kernels.hpp"

using namespace wsod;
namespace k = wsod::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-2.0, 2.0);
  return v;
}

struct BackendGuard {
  k::Backend saved = k::active_backend();
  ~BackendGuard() { k::set_backend(saved); }
};

template <typename Fn>
void for_each_backend(Fn&& fn) {
  BackendGuard guard;
  k::set_backend(k::Backend::Scalar);
  fn(k::Backend::Scalar);
  if (k::avx2_supported()) {
    k::set_backend(k::Backend::Avx2);
    fn(k::Backend::Avx2);
  }
}

}  // namespace

TEST_CASE("dot and axpy small oracles") {
  for_each_backend([](k::Backend) {
    const double a[] = {1.0, 2.0, 3.0};
    const double b[] = {4.0, -5.0, 6.0};
    CHECK(k::dot(a, b, 3) == doctest::Approx(12.0));
    double y[] = {1.0, 1.0, 1.0};
    k::axpy(2.0, a, y, 3);
    CHECK(y[0] == doctest::Approx(3.0));
    CHECK(y[1] == doctest::Approx(5.0));
    CHECK(y[2] == doctest::Approx(7.0));
  });
}

TEST_CASE("gemm_nn 2x2 oracle") {
  for_each_backend([](k::Backend) {
    // [1 2; 3 4] * [5 6; 7 8] = [19 22; 43 50]
    const double a[] = {1, 2, 3, 4};
    const double b[] = {5, 6, 7, 8};
    double c[4];
    k::gemm_nn(2, 2, 2, a, b, c, false);
    CHECK(c[0] == doctest::Approx(19));
    CHECK(c[1] == doctest::Approx(22));
    CHECK(c[2] == doctest::Approx(43));
    CHECK(c[3] == doctest::Approx(50));
  });
}

TEST_CASE("scalar and avx2 backends agree") {
  if (!k::avx2_supported()) return;
  BackendGuard guard;
  Rng rng(7);
  for (std::size_t n : {1ul, 3ul, 4ul, 7ul, 8ul, 17ul, 64ul, 301ul}) {
    auto a = random_vec(n, rng);
    auto b = random_vec(n, rng);
    auto y0 = random_vec(n, rng);
    auto y1 = y0;

    k::set_backend(k::Backend::Scalar);
    double dot_s = k::dot(a.data(), b.data(), n);
    double sum_s = k::vsum(a.data(), n);
    double max_s = k::vmax(a.data(), n);
    k::axpy(1.7, a.data(), y0.data(), n);

    k::set_backend(k::Backend::Avx2);
    double dot_v = k::dot(a.data(), b.data(), n);
    double sum_v = k::vsum(a.data(), n);
    double max_v = k::vmax(a.data(), n);
    k::axpy(1.7, a.data(), y1.data(), n);

    CHECK(testutil::rel_err(dot_s, dot_v) < 1e-12);
    CHECK(testutil::rel_err(sum_s, sum_v) < 1e-12);
    CHECK(max_s == max_v);
    for (std::size_t i = 0; i < n; ++i) CHECK(testutil::rel_err(y0[i], y1[i]) < 1e-14);
  }
}

TEST_CASE("gemm variants agree across backends and against a naive oracle") {
  if (!k::avx2_supported()) return;
  BackendGuard guard;
  Rng rng(13);
  const std::size_t m = 7, n = 9, kk = 11;
  auto a = random_vec(m * kk, rng);
  auto b = random_vec(kk * n, rng);
  auto bt = random_vec(n * kk, rng);
  auto at = random_vec(kk * m, rng);

  std::vector<double> naive(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < kk; ++p) naive[i * n + j] += a[i * kk + p] * b[p * n + j];

  for (auto backend : {k::Backend::Scalar, k::Backend::Avx2}) {
    k::set_backend(backend);
    std::vector<double> c(m * n, 1.0);
    k::gemm_nn(m, n, kk, a.data(), b.data(), c.data(), false);
    for (std::size_t i = 0; i < m * n; ++i) CHECK(testutil::rel_err(c[i], naive[i]) < 1e-12);

    // nt: C = A * Bt^T where Bt is n x kk
    std::vector<double> naive_nt(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t p = 0; p < kk; ++p)
          naive_nt[i * n + j] += a[i * kk + p] * bt[j * kk + p];
    std::vector<double> cnt(m * n, 0.0);
    k::gemm_nt(m, n, kk, a.data(), bt.data(), cnt.data(), false);
    for (std::size_t i = 0; i < m * n; ++i) CHECK(testutil::rel_err(cnt[i], naive_nt[i]) < 1e-12);

    // tn: C = At^T * B where At is kk x m
    std::vector<double> naive_tn(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t p = 0; p < kk; ++p)
          naive_tn[i * n + j] += at[p * m + i] * b[p * n + j];
    std::vector<double> ctn(m * n, 0.0);
    k::gemm_tn(m, n, kk, at.data(), b.data(), ctn.data(), false);
    for (std::size_t i = 0; i < m * n; ++i) CHECK(testutil::rel_err(ctn[i], naive_tn[i]) < 1e-12);
  }
}

TEST_CASE("gemm row-chunked accumulation is bitwise equal to full batch") {
  // the property the sequential schedule relies on
  for_each_backend([](k::Backend) {
    Rng rng(29);
    const std::size_t rows = 23, m = 6, n = 5;
    auto a = random_vec(rows * m, rng);  // dY
    auto b = random_vec(rows * n, rng);  // X
    std::vector<double> full(m * n, 0.0), chunked(m * n, 0.0);
    k::gemm_tn(m, n, rows, a.data(), b.data(), full.data(), true);
    for (std::size_t start = 0; start < rows;) {
      std::size_t len = std::min<std::size_t>(rows - start, 7);
      k::gemm_tn(m, n, len, a.data() + start * m, b.data() + start * n, chunked.data(), true);
      start += len;
    }
    for (std::size_t i = 0; i < m * n; ++i) CHECK(full[i] == chunked[i]);
  });
}

TEST_CASE("relu and gradient mask") {
  for_each_backend([](k::Backend) {
    const double x[] = {-1.0, 0.0, 2.0, -3.0, 4.0};
    double y[5];
    k::relu(x, y, 5);
    CHECK(y[0] == 0.0);
    CHECK(y[1] == 0.0);
    CHECK(y[2] == 2.0);
    CHECK(y[4] == 4.0);
    const double gy[] = {1, 1, 1, 1, 1};
    double gx[5] = {0, 0, 0, 0, 0};
    k::relu_grad(x, gy, gx, 5);
    CHECK(gx[0] == 0.0);
    CHECK(gx[2] == 1.0);
    CHECK(gx[4] == 1.0);
  });
}

TEST_CASE("elementwise ops match across backends") {
  if (!k::avx2_supported()) return;
  BackendGuard guard;
  Rng rng(31);
  auto a = random_vec(37, rng);
  auto b = random_vec(37, rng);
  std::vector<double> o1(37), o2(37), m1(37), m2(37);
  k::set_backend(k::Backend::Scalar);
  k::vadd(a.data(), b.data(), o1.data(), 37);
  k::vmul(a.data(), b.data(), m1.data(), 37);
  k::set_backend(k::Backend::Avx2);
  k::vadd(a.data(), b.data(), o2.data(), 37);
  k::vmul(a.data(), b.data(), m2.data(), 37);
  for (std::size_t i = 0; i < 37; ++i) {
    CHECK(o1[i] == o2[i]);
    CHECK(m1[i] == m2[i]);
  }
}
