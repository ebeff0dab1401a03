#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "testutil.hpp"
#include "wsod/geometry.hpp"

using namespace wsod;
using geometry::Box;

TEST_CASE("iou identity, disjoint, and hand arithmetic") {
  CHECK(geometry::iou({0, 0, 10, 10}, {0, 0, 10, 10}) == 1.0);
  CHECK(geometry::iou({0, 0, 10, 10}, {20, 20, 30, 30}) == 0.0);
  // inter = 50, union = 150
  CHECK(geometry::iou({0, 0, 10, 10}, {5, 0, 15, 10}) == doctest::Approx(1.0 / 3).epsilon(1e-12));
}

TEST_CASE("iou properties over random boxes") {
  Rng rng(17);
  for (int i = 0; i < 2000; ++i) {
    Box a = testutil::random_box(rng);
    Box b = testutil::random_box(rng);
    double v = geometry::iou(a, b);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(v == geometry::iou(b, a));
    CHECK(geometry::iou(a, a) == 1.0);
    if (!(a == b)) CHECK(geometry::iou(a, b) < 1.0);
  }
}

TEST_CASE("clip_box clamps and rejects collapsed boxes") {
  Box c = geometry::clip_box({-5, -5, 10, 10}, 100, 100);
  CHECK(c == Box{0, 0, 10, 10});
  CHECK(geometry::clip_box({0, 0, 10, 10}, 100, 100) == Box{0, 0, 10, 10});
  CHECK(geometry::clip_box({99, 99, 200, 200}, 100, 100) == Box{99, 99, 100, 100});
  CHECK_THROWS_AS(geometry::clip_box({100, 50, 200, 60}, 100, 100), geometry::ZeroAreaAfterClip);
  // clipped area 5e-7 px^2, below the 1e-6 epsilon
  CHECK_THROWS_AS(geometry::clip_box({99.99999995, 0, 110, 10}, 100, 100),
                  geometry::ZeroAreaAfterClip);
}

TEST_CASE("greedy selection keeps the first box and suppresses by strict threshold") {
  Box a{0, 0, 10, 10};
  SUBCASE("single element") {
    CHECK(geometry::greedy_diverse_select({a}, 0.5) == std::vector<Box>{a});
  }
  SUBCASE("duplicate suppressed, disjoint kept") {
    Box c{20, 0, 30, 10};
    auto kept = geometry::greedy_diverse_select({a, a, c}, 0.2);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0] == a);
    CHECK(kept[1] == c);
  }
  SUBCASE("iou just below the threshold is kept") {
    // IoU((0,0,10,10),(x,0,x+10,10)) = (10-x)/(10+x) = 0.19
    double x = 10.0 * (1.0 - 0.19) / (1.0 + 0.19);
    Box b{x, 0, x + 10, 10};
    CHECK(geometry::iou(a, b) == doctest::Approx(0.19).epsilon(1e-12));
    CHECK(geometry::greedy_diverse_select({a, b}, 0.2).size() == 2);
  }
  SUBCASE("iou exactly equal to the threshold is rejected") {
    // A area 4, B area 2 fully inside overlap column: IoU exactly 0.5
    Box a2{0, 0, 4, 1}, b2{2, 0, 4, 1};
    CHECK(geometry::iou(a2, b2) == 0.5);
    CHECK(geometry::greedy_diverse_select({a2, b2}, 0.5).size() == 1);
    CHECK(geometry::greedy_diverse_select({a2, b2}, 0.5000001).size() == 2);
  }
  SUBCASE("empty input") { CHECK(geometry::greedy_diverse_select({}, 0.3).empty()); }
}

TEST_CASE("greedy selection output is pairwise diverse and idempotent") {
  Rng rng(23);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Box> boxes;
    int n = rng.uniform_int(1, 40);
    for (int i = 0; i < n; ++i) boxes.push_back(testutil::random_box(rng));
    double tau = rng.uniform(0.05, 0.95);
    auto kept = geometry::greedy_diverse_select(boxes, tau);
    REQUIRE(!kept.empty());
    CHECK(kept[0] == boxes[0]);
    for (std::size_t i = 0; i < kept.size(); ++i)
      for (std::size_t j = i + 1; j < kept.size(); ++j)
        CHECK(geometry::iou(kept[i], kept[j]) < tau);
    CHECK(geometry::greedy_diverse_select(kept, tau) == kept);
  }
}
