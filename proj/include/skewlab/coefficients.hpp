#pragma once

#include <functional>
#include <string>
#include <vector>

namespace skewlab {

/// A real coefficient c(x, eps) with optional eps-dependent breakpoints.
///
/// Breakpoints mark jumps or kinks; quadrature splits there and class
/// checks sample there. Coefficients without eps dependence ignore the
/// second argument.
class ScalarCoefficient {
 public:
  using Fn = std::function<double(double x, double eps)>;
  using BreakpointFn = std::function<std::vector<double>(double eps)>;

  ScalarCoefficient();
  ScalarCoefficient(Fn fn, std::string label, BreakpointFn breakpoints = {});

  static ScalarCoefficient constant(double value, std::string label = {});
  /// Wraps an eps-independent function of x.
  static ScalarCoefficient of_x(std::function<double(double)> fn, std::string label,
                                std::vector<double> breakpoints = {});

  double operator()(double x, double eps = 0.0) const { return fn_(x, eps); }

  std::vector<double> breakpoints(double eps = 0.0) const;
  const std::string& label() const noexcept { return label_; }

  /// Freezes eps; the result ignores its own eps argument.
  ScalarCoefficient bind(double eps) const;

 private:
  Fn fn_;
  std::string label_;
  BreakpointFn breakpoints_;
};

/// Pointwise sum; breakpoints are merged.
ScalarCoefficient operator+(const ScalarCoefficient& a, const ScalarCoefficient& b);

/// Skew parameter with |beta| < 1; throws InvalidSkew otherwise.
class SkewParam {
 public:
  explicit SkewParam(double beta);
  double value() const noexcept { return beta_; }

 private:
  double beta_;
};

}  // namespace skewlab
