#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "testutil.hpp"
#include "wsod/milhead.hpp"

using namespace wsod;
namespace mh = wsod::milhead;

TEST_CASE("single region forces the detection softmax to one") {
  Tensor f{1, 3}, g{1, 3};
  f[0] = 0.3;
  f[1] = -1.0;
  f[2] = 2.0;
  g[0] = 5.0;
  g[1] = -5.0;
  g[2] = 0.0;
  mh::ScoreMatrix sm = mh::score(f, g);
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(sm.s_det.at(0, c) == doctest::Approx(1.0));
    CHECK(sm.phi[c] == doctest::Approx(sm.s_cls.at(0, c)));
  }
}

TEST_CASE("all-zero logits give the hand-computed uniform scores") {
  Tensor f{2, 3}, g{2, 3};
  mh::ScoreMatrix sm = mh::score(f, g);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(sm.s_cls.at(r, c) == doctest::Approx(1.0 / 3));
      CHECK(sm.s_det.at(r, c) == doctest::Approx(0.5));
      CHECK(sm.s_joint.at(r, c) == doctest::Approx(1.0 / 6));
    }
  for (std::size_t c = 0; c < 3; ++c) CHECK(sm.phi[c] == doctest::Approx(1.0 / 3));
}

TEST_CASE("score invariants over random logits") {
  Rng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    std::size_t rr = static_cast<std::size_t>(rng.uniform_int(1, 12));
    std::size_t kk = static_cast<std::size_t>(rng.uniform_int(2, 6));
    Tensor f = testutil::random_tensor({rr, kk}, rng, -6.0, 6.0);
    Tensor g = testutil::random_tensor({rr, kk}, rng, -6.0, 6.0);
    mh::ScoreMatrix sm = mh::score(f, g);
    for (std::size_t i = 0; i < rr; ++i) {
      double s = 0.0;
      for (std::size_t c = 0; c < kk; ++c) s += sm.s_cls.at(i, c);
      CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    }
    for (std::size_t c = 0; c < kk; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i < rr; ++i) s += sm.s_det.at(i, c);
      CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(sm.phi[c] >= 0.0);
      CHECK(sm.phi[c] <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("softmax translation invariance") {
  Rng rng(11);
  Tensor f = testutil::random_tensor({4, 5}, rng);
  Tensor g = testutil::random_tensor({4, 5}, rng);
  mh::ScoreMatrix sm = mh::score(f, g);
  Tensor f2 = f, g2 = g;
  for (std::size_t c = 0; c < 5; ++c) f2.at(2, c) += 3.7;  // shift one row of f
  for (std::size_t r = 0; r < 4; ++r) g2.at(r, 3) -= 2.2;  // shift one column of g
  mh::ScoreMatrix sm2 = mh::score(f2, g2);
  for (std::size_t i = 0; i < sm.s_cls.size(); ++i) {
    CHECK(sm.s_cls[i] == doctest::Approx(sm2.s_cls[i]).epsilon(1e-6));
    CHECK(sm.s_det[i] == doctest::Approx(sm2.s_det[i]).epsilon(1e-6));
  }
}

TEST_CASE("shape and finiteness errors") {
  Tensor f{2, 3}, g{3, 2};
  CHECK_THROWS_AS(mh::score(f, g), std::invalid_argument);
  Tensor g2{2, 3};
  g2[0] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(mh::score(f, g2), std::invalid_argument);
}

TEST_CASE("image loss examples") {
  SUBCASE("perfect prediction approaches zero") {
    Tensor phi{2};
    phi[0] = 1.0 - 1e-9;
    phi[1] = 1e-9;
    std::vector<int> y = {1, 0};
    CHECK(mh::image_loss(phi, y, mh::ImageLossMode::BinaryCrossEntropy) ==
          doctest::Approx(0.0).epsilon(1e-6));
  }
  SUBCASE("literal mode hand value") {
    Tensor phi{1};
    phi[0] = 0.5;
    std::vector<int> y = {1};
    CHECK(mh::image_loss(phi, y, mh::ImageLossMode::Literal) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("binary CE hand value") {
    Tensor phi{2};
    phi[0] = 0.5;
    phi[1] = 0.5;
    std::vector<int> y = {1, 0};
    CHECK(mh::image_loss(phi, y, mh::ImageLossMode::BinaryCrossEntropy) ==
          doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-12));
  }
  SUBCASE("literal mode ignores absent classes") {
    Tensor phi{2};
    phi[0] = 0.5;
    phi[1] = 0.9;
    std::vector<int> y = {1, 0};
    CHECK(mh::image_loss(phi, y, mh::ImageLossMode::Literal) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }
}

namespace {

double loss_of_logits(const Tensor& f, const Tensor& g, const std::vector<int>& y,
                      mh::ImageLossMode mode) {
  mh::ScoreMatrix sm = mh::score(f, g);
  return mh::image_loss(sm.phi, y, mode);
}

void gradcheck_image_loss(mh::ImageLossMode mode, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t rr = 6, kk = 4;
  Tensor f = testutil::random_tensor({rr, kk}, rng, -1.5, 1.5);
  Tensor g = testutil::random_tensor({rr, kk}, rng, -1.5, 1.5);
  std::vector<int> y = {1, 0, 1, 0};

  mh::ScoreMatrix sm = mh::score(f, g);
  Tensor dphi = mh::image_loss_grad_phi(sm.phi, y, mode);
  Tensor d_joint{rr, kk};
  for (std::size_t i = 0; i < rr; ++i)
    for (std::size_t c = 0; c < kk; ++c) d_joint.at(i, c) = dphi[c];
  Tensor df, dg;
  mh::score_backward(sm, d_joint, df, dg);

  auto eval = [&]() { return loss_of_logits(f, g, y, mode); };
  int checked = 0;
  for (int t = 0; t < 20; ++t) {
    std::size_t idx = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(rr * kk) - 1));
    double fd_f = testutil::central_diff(eval, &f[idx], 1e-6);
    double fd_g = testutil::central_diff(eval, &g[idx], 1e-6);
    CHECK(testutil::rel_err(fd_f, df[idx]) < 1e-4);
    CHECK(testutil::rel_err(fd_g, dg[idx]) < 1e-4);
    ++checked;
  }
  CHECK(checked == 20);
}

}  // namespace

TEST_CASE("analytic image-loss gradients match finite differences") {
  gradcheck_image_loss(mh::ImageLossMode::BinaryCrossEntropy, 101);
  gradcheck_image_loss(mh::ImageLossMode::Literal, 202);
}
