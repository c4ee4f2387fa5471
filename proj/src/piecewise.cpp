#include "skewlab/piecewise.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "skewlab/errors.hpp"

namespace skewlab {

namespace {

constexpr double kAnchorTol = 1e-12;
// Monotonicity is sampled on [0, 10] of each half-line.
constexpr int kMonotoneSamples = 200;
constexpr double kMonotoneReach = 10.0;

const char* side_name(Side s) { return s == Side::Left ? "left" : "right"; }

void validate_branch(const SmoothBranch& b, Side expected) {
  if (!b.eval || !b.d1 || !b.d2) {
    throw ValidationError(std::string(side_name(expected)) + " branch is missing eval/d1/d2");
  }
  if (b.side != expected) {
    throw ValidationError(std::string("branch declared on the wrong side, expected ") +
                          side_name(expected));
  }
  const double v0 = b.eval(0.0);
  if (!(std::abs(v0) <= kAnchorTol)) {
    throw ValidationError(std::string(side_name(expected)) +
                          " branch must satisfy eval(0) = 0, got " + std::to_string(v0));
  }
  if (!std::isfinite(b.d2(0.0))) {
    throw ValidationError(std::string(side_name(expected)) + " branch has non-finite d2(0)");
  }
  const double dir = expected == Side::Left ? -1.0 : 1.0;
  for (int i = 0; i <= kMonotoneSamples; ++i) {
    const double x = dir * kMonotoneReach * i / kMonotoneSamples;
    const double slope = b.d1(x);
    if (!std::isfinite(slope) || !(slope > 0.0)) {
      throw ValidationError(std::string(side_name(expected)) +
                            " branch is not strictly increasing at x = " + std::to_string(x));
    }
  }
}

}  // namespace

double sgn(double x) noexcept {
  if (x > 0.0) return 1.0;
  if (x < 0.0) return -1.0;
  return 0.0;
}

PiecewiseC2::PiecewiseC2(SmoothBranch left, SmoothBranch right)
    : left_(std::move(left)), right_(std::move(right)) {
  validate_branch(left_, Side::Left);
  validate_branch(right_, Side::Right);
  left_slope_ = left_.d1(0.0);
  right_slope_ = right_.d1(0.0);
}

PiecewiseC2 PiecewiseC2::identity() { return linear(1.0, 1.0); }

PiecewiseC2 PiecewiseC2::linear(double left_slope, double right_slope) {
  auto branch = [](double k, Side side) {
    return SmoothBranch{[k](double x) { return k * x; }, [k](double) { return k; },
                        [](double) { return 0.0; }, side};
  };
  return PiecewiseC2(branch(left_slope, Side::Left), branch(right_slope, Side::Right));
}

double PiecewiseC2::operator()(double x) const {
  if (x < 0.0) return left_.eval(x);
  if (x > 0.0) return right_.eval(x);
  return 0.0;
}

double PiecewiseC2::d1(double x) const { return x < 0.0 ? left_.d1(x) : right_.d1(x); }

double sym_deriv(const PiecewiseC2& u, double x) {
  if (x > 0.0) return u.right().d1(x);
  if (x < 0.0) return u.left().d1(x);
  return 0.5 * (u.left_slope() + u.right_slope());
}

double curvature_density(const PiecewiseC2& u, double x) {
  if (x > 0.0) return u.right().d2(x);
  if (x < 0.0) return u.left().d2(x);
  return 0.5 * (u.left().d2(0.0) + u.right().d2(0.0));
}

SecondDerivMeasure second_deriv_measure(const PiecewiseC2& u) {
  SecondDerivMeasure m;
  m.atom_at_zero = u.right_slope() - u.left_slope();
  m.density = [u](double x) { return curvature_density(u, x); };
  return m;
}

double invert(const PiecewiseC2& u, double y, const InvertOptions& opts) {
  if (!std::isfinite(y)) throw NoBracket("cannot invert a non-finite value");
  if (y == 0.0) return 0.0;

  const double dir = y > 0.0 ? 1.0 : -1.0;
  const double limit = opts.search_scale * (1.0 + std::abs(y));
  const double target = std::abs(y);
  // Work on t = |x| where g(t) = |u(dir * t)| is increasing.
  auto g = [&](double t) { return dir * u(dir * t); };

  double lo = 0.0;
  double hi = 1.0;
  double g_hi = g(hi);
  while (g_hi < target) {
    if (hi >= limit) {
      throw NoBracket("value " + std::to_string(y) + " lies outside the range of u on [" +
                      std::to_string(-limit) + ", " + std::to_string(limit) + "]");
    }
    lo = hi;
    hi = std::min(2.0 * hi, limit);
    g_hi = g(hi);
  }
  if (std::isnan(g_hi)) throw NoBracket("u is not finite while bracketing " + std::to_string(y));

  const double tol =
      std::max(opts.atol, 4.0 * std::numeric_limits<double>::epsilon() * target);
  double t = 0.5 * (lo + hi);
  double best_t = t;
  double best_res = std::numeric_limits<double>::infinity();
  for (int it = 0; it < opts.max_iterations; ++it) {
    const double res = g(t) - target;
    if (std::abs(res) < best_res) {
      best_res = std::abs(res);
      best_t = t;
    }
    if (std::abs(res) <= tol) return dir * t;
    if (res < 0.0) {
      lo = t;
    } else {
      hi = t;
    }
    if (hi - lo <= 2.0 * std::numeric_limits<double>::epsilon() * hi) break;
    const double slope = u.d1(dir * t);
    double next = t - res / slope;
    if (!std::isfinite(next) || next <= lo || next >= hi) next = 0.5 * (lo + hi);
    t = next;
  }
  // Bracket collapsed to adjacent doubles: the closest representable root.
  return dir * best_t;
}

}  // namespace skewlab
