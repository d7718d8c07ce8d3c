#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "m2oe2/diff/tensor.hpp"

namespace testing {

using m2oe2::diff::Shape;
using m2oe2::diff::Tensor;

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = -3.0, double hi = 3.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = u(rng);
  return t;
}

// Central differences of f at x, one coordinate at a time.
inline Tensor numeric_grad(const std::function<double(const Tensor&)>& f, const Tensor& x,
                           double eps = 1e-6) {
  Tensor g(x.shape());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double up = f(probe);
    probe[i] = orig - eps;
    const double down = f(probe);
    probe[i] = orig;
    g[i] = (up - down) / (2.0 * eps);
  }
  return g;
}

// Relative difference for entries above 1 in magnitude, absolute below.
inline double max_rel_diff(const Tensor& a, const Tensor& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), 1.0});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

}  // namespace testing
