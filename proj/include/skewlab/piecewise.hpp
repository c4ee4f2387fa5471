#pragma once

#include <functional>

namespace skewlab {

/// Three-valued sign with sgn(0) = 0.
double sgn(double x) noexcept;

enum class Side { Left, Right };

using RealFn = std::function<double(double)>;

/// One C2 branch of a piecewise map, anchored at the origin.
///
/// The value and both derivatives are supplied together as closed forms so
/// that the one-sided slopes at 0 are exact.
struct SmoothBranch {
  RealFn eval;
  RealFn d1;
  RealFn d2;
  Side side = Side::Right;
};

struct InvertOptions {
  double atol = 1e-12;
  /// Search interval is [-scale * (1 + |y|), scale * (1 + |y|)].
  double search_scale = 1e10;
  int max_iterations = 400;
};

/// Strictly increasing map built from a left branch (x <= 0) and a right
/// branch (x >= 0) that meet at u(0) = 0.
class PiecewiseC2 {
 public:
  /// Throws ValidationError if a branch is not anchored at 0, sits on the
  /// wrong side, or is not strictly increasing on its own half-line.
  PiecewiseC2(SmoothBranch left, SmoothBranch right);

  static PiecewiseC2 identity();
  /// u(x) = left_slope * x for x < 0 and right_slope * x for x >= 0.
  static PiecewiseC2 linear(double left_slope, double right_slope);

  double operator()(double x) const;
  /// One-sided first derivative (left branch for x < 0, right otherwise).
  double d1(double x) const;

  const SmoothBranch& left() const noexcept { return left_; }
  const SmoothBranch& right() const noexcept { return right_; }

  /// Left slope at the origin, u1 = u1'(0).
  double left_slope() const noexcept { return left_slope_; }
  /// Right slope at the origin, u2 = u2'(0).
  double right_slope() const noexcept { return right_slope_; }

 private:
  SmoothBranch left_;
  SmoothBranch right_;
  double left_slope_;
  double right_slope_;
};

/// Atom plus density representation of a second distributional derivative.
struct SecondDerivMeasure {
  double atom_at_zero = 0.0;
  RealFn density;
};

/// Symmetric derivative: the branch slope off 0, (u1 + u2) / 2 at 0.
double sym_deriv(const PiecewiseC2& u, double x);

/// Absolutely continuous part of u'' (u2'' for x > 0, u1'' for x < 0 and
/// their average at 0).
double curvature_density(const PiecewiseC2& u, double x);

SecondDerivMeasure second_deriv_measure(const PiecewiseC2& u);

/// Solves u(x) = y by bracketing bisection with Newton refinement.
/// Throws NoBracket if y is not reached inside the search interval.
double invert(const PiecewiseC2& u, double y, const InvertOptions& opts = {});

}  // namespace skewlab
