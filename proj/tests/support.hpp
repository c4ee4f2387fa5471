#pragma once

#include <cmath>
#include <vector>

#include "skewlab/piecewise.hpp"

namespace skewlab::testing {

inline SmoothBranch branch(RealFn f, RealFn d1, RealFn d2, Side side) {
  return {std::move(f), std::move(d1), std::move(d2), side};
}

inline SmoothBranch linear_branch(double slope, Side side) {
  return branch([slope](double x) { return slope * x; }, [slope](double) { return slope; },
                [](double) { return 0.0; }, side);
}

/// u1(x) = x on the left, u2(x) = x + x^2 on the right.
inline PiecewiseC2 curved_map() {
  return PiecewiseC2(linear_branch(1.0, Side::Left),
                     branch([](double x) { return x + x * x; }, [](double x) { return 1.0 + 2.0 * x; },
                            [](double) { return 2.0; }, Side::Right));
}

inline std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = n == 1 ? a : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  return out;
}

}  // namespace skewlab::testing
