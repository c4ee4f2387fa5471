#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace skewlab {

struct QuadratureOptions {
  double rtol = 1e-9;
  double atol = 1e-12;
  std::size_t max_panels = 10000;
};

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  std::size_t panels = 0;
};

/// Globally adaptive 7/15-point Gauss-Kronrod integration of f over [a, b].
///
/// The interval is first split at every breakpoint strictly inside it, so
/// jump or kink locations never sit inside a panel. The panel with the
/// largest error estimate is bisected until the summed estimate drops below
/// max(atol, rtol * |value|). Reversed limits (b < a) give the negated
/// integral. Throws QuadratureFailure when max_panels is exhausted or the
/// integrand is not finite.
QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           std::span<const double> breakpoints = {},
                           const QuadratureOptions& opts = {});

/// Convenience wrapper returning only the value.
double integral(const std::function<double(double)>& f, double a, double b,
                std::span<const double> breakpoints = {}, const QuadratureOptions& opts = {});

}  // namespace skewlab
