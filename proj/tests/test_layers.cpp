#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "testutil.hpp"
#include "wsod/kernels.hpp"
#include "wsod/layers.hpp"

using namespace wsod;

namespace {

// scalar objective: weighted sum of outputs with fixed random weights
double weighted_sum(const Tensor& t, const Tensor& w) {
  return kernels::dot(t.data(), w.data(), t.size());
}

}  // namespace

TEST_CASE("linear forward oracle and gradients") {
  Rng rng(3);
  layers::Linear lin("t", 3, 2);
  lin.init_he(rng);
  // pin simple weights for the forward oracle
  for (std::size_t i = 0; i < 6; ++i) lin.w.value[i] = static_cast<double>(i + 1) * 0.1;
  lin.b.value[0] = 0.5;
  lin.b.value[1] = -0.5;
  Tensor x{1, 3};
  x[0] = 1.0;
  x[1] = 2.0;
  x[2] = 3.0;
  Tensor y = lin.forward(x, true);
  // y0 = 0.1*1+0.2*2+0.3*3+0.5 = 1.9 ; y1 = 0.4+1.0+1.8-0.5 = 2.7
  CHECK(y.at(0, 0) == doctest::Approx(1.9));
  CHECK(y.at(0, 1) == doctest::Approx(2.7));

  // finite-difference check on a batch
  layers::Linear lin2("t2", 4, 3);
  lin2.init_he(rng);
  Tensor xb = testutil::random_tensor({5, 4}, rng);
  Tensor wobj = testutil::random_tensor({5, 3}, rng);
  auto eval = [&]() {
    layers::Linear tmp = lin2;
    Tensor out = tmp.forward(xb, false);
    return weighted_sum(out, wobj);
  };
  lin2.w.zero_grad();
  lin2.b.zero_grad();
  Tensor out = lin2.forward(xb, true);
  Tensor gx = lin2.backward(wobj);
  for (int t = 0; t < 10; ++t) {
    std::size_t wi = static_cast<std::size_t>(rng.uniform_int(0, 11));
    CHECK(testutil::rel_err(testutil::central_diff(eval, &lin2.w.value[wi], 1e-6),
                            lin2.w.grad[wi]) < 1e-6);
    std::size_t xi = static_cast<std::size_t>(rng.uniform_int(0, 19));
    CHECK(testutil::rel_err(testutil::central_diff(eval, &xb[xi], 1e-6), gx[xi]) < 1e-6);
  }
  for (std::size_t bi = 0; bi < 3; ++bi)
    CHECK(testutil::rel_err(testutil::central_diff(eval, &lin2.b.value[bi], 1e-6),
                            lin2.b.grad[bi]) < 1e-6);
}

TEST_CASE("conv2d matches finite differences") {
  Rng rng(9);
  layers::Conv2d conv("c", 2, 3, 3, 1, 1);
  conv.init_he(rng);
  Tensor x = testutil::random_tensor({2, 5, 5}, rng);
  Tensor wobj = testutil::random_tensor({3, 5, 5}, rng);
  auto eval = [&]() {
    layers::Conv2d tmp = conv;
    return weighted_sum(tmp.forward(x, false), wobj);
  };
  conv.w.zero_grad();
  conv.b.zero_grad();
  conv.forward(x, true);
  Tensor gx = conv.backward(wobj);
  for (int t = 0; t < 12; ++t) {
    std::size_t wi =
        static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(conv.w.value.size()) - 1));
    CHECK(testutil::rel_err(testutil::central_diff(eval, &conv.w.value[wi], 1e-6),
                            conv.w.grad[wi]) < 1e-5);
    std::size_t xi = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(x.size()) - 1));
    CHECK(testutil::rel_err(testutil::central_diff(eval, &x[xi], 1e-6), gx[xi]) < 1e-5);
  }
  for (std::size_t bi = 0; bi < 3; ++bi)
    CHECK(testutil::rel_err(testutil::central_diff(eval, &conv.b.value[bi], 1e-6),
                            conv.b.grad[bi]) < 1e-5);
}

TEST_CASE("strided batched conv output shape and gradcheck") {
  Rng rng(41);
  layers::Conv2d conv("c", 3, 4, 3, 2, 1);
  conv.init_he(rng);
  Tensor x = testutil::random_tensor({2, 3, 6, 6}, rng);
  Tensor y = conv.forward(x, true);
  REQUIRE(y.dims() == std::vector<std::size_t>{2, 4, 3, 3});
  Tensor wobj = testutil::random_tensor({2, 4, 3, 3}, rng);
  Tensor gx = conv.backward(wobj);
  auto eval = [&]() {
    layers::Conv2d tmp = conv;
    return weighted_sum(tmp.forward(x, false), wobj);
  };
  for (int t = 0; t < 8; ++t) {
    std::size_t xi = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(x.size()) - 1));
    CHECK(testutil::rel_err(testutil::central_diff(eval, &x[xi], 1e-6), gx[xi]) < 1e-5);
  }
}

TEST_CASE("roi pooling picks window maxima and routes gradients to argmax cells") {
  Tensor fmap{1, 4, 4};
  for (std::size_t i = 0; i < 16; ++i) fmap[i] = static_cast<double>(i);
  // box covering the whole map in image coords with scale 0.25 -> feature coords [0,4)
  std::vector<geometry::Box> boxes = {{0, 0, 16, 16}};
  layers::RoiPoolOut out = layers::roi_pool(fmap, boxes, 0, 1, 0.25, 2);
  REQUIRE(out.features.dims() == std::vector<std::size_t>{1, 1, 2, 2});
  CHECK(out.features.at(0, 0, 0, 0) == 5.0);
  CHECK(out.features.at(0, 0, 0, 1) == 7.0);
  CHECK(out.features.at(0, 0, 1, 0) == 13.0);
  CHECK(out.features.at(0, 0, 1, 1) == 15.0);

  Tensor gout{1, 1, 2, 2};
  gout.fill(1.0);
  Tensor gmap{1, 4, 4};
  layers::roi_pool_backward(gout, out.argmax, gmap);
  CHECK(gmap[5] == 1.0);
  CHECK(gmap[7] == 1.0);
  CHECK(gmap[13] == 1.0);
  CHECK(gmap[15] == 1.0);
  CHECK(kernels::vsum(gmap.data(), 16) == 4.0);
}

TEST_CASE("roi pooling handles tiny and border boxes") {
  Rng rng(77);
  Tensor fmap = testutil::random_tensor({3, 8, 8}, rng);
  std::vector<geometry::Box> boxes = {{0.1, 0.1, 1.2, 1.3}, {30.0, 30.0, 32.0, 32.0},
                                      {0.0, 0.0, 32.0, 2.0}};
  layers::RoiPoolOut out = layers::roi_pool(fmap, boxes, 0, 3, 0.25, 5);
  CHECK(out.features.all_finite());
  // every argmax index must be in range
  for (std::int64_t idx : out.argmax) {
    CHECK(idx >= 0);
    CHECK(idx < static_cast<std::int64_t>(fmap.size()));
  }
}

TEST_CASE("layer caches report to the accountant and clear fully") {
  seqbp::MemoryAccountant acc;
  Rng rng(1);
  layers::Linear lin("t", 8, 4);
  lin.init_he(rng);
  lin.set_accounting(&acc, seqbp::Zone::Region);
  Tensor x = testutil::random_tensor({10, 8}, rng);
  lin.forward(x, true);
  CHECK(acc.live(seqbp::Zone::Region) == 80);
  lin.clear_cache();
  CHECK(acc.live(seqbp::Zone::Region) == 0);
  CHECK(acc.peak(seqbp::Zone::Region) == 80);
}
