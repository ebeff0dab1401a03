#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "wsod/geometry.hpp"
#include "wsod/rng.hpp"
#include "wsod/tensor.hpp"

namespace testutil {

inline double rel_err(double a, double b) {
  double denom = std::max({std::abs(a), std::abs(b), 1e-10});
  return std::abs(a - b) / denom;
}

// central finite difference of a scalar functional at x[i]
inline double central_diff(std::function<double()> eval, double* slot, double h) {
  const double saved = *slot;
  *slot = saved + h;
  double up = eval();
  *slot = saved - h;
  double down = eval();
  *slot = saved;
  return (up - down) / (2.0 * h);
}

inline wsod::Tensor random_tensor(std::vector<std::size_t> dims, wsod::Rng& rng, double lo = -1.0,
                                  double hi = 1.0) {
  wsod::Tensor t{std::move(dims)};
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

inline wsod::geometry::Box random_box(wsod::Rng& rng, double img = 100.0) {
  double w = rng.uniform(2.0, img * 0.6);
  double h = rng.uniform(2.0, img * 0.6);
  double x1 = rng.uniform(0.0, img - w);
  double y1 = rng.uniform(0.0, img - h);
  return {x1, y1, x1 + w, y1 + h};
}

}  // namespace testutil
