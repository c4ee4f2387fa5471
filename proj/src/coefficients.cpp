#include "skewlab/coefficients.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "skewlab/errors.hpp"

namespace skewlab {

ScalarCoefficient::ScalarCoefficient()
    : ScalarCoefficient([](double, double) { return 0.0; }, "0") {}

ScalarCoefficient::ScalarCoefficient(Fn fn, std::string label, BreakpointFn breakpoints)
    : fn_(std::move(fn)), label_(std::move(label)), breakpoints_(std::move(breakpoints)) {}

ScalarCoefficient ScalarCoefficient::constant(double value, std::string label) {
  if (label.empty()) label = std::to_string(value);
  return {[value](double, double) { return value; }, std::move(label)};
}

ScalarCoefficient ScalarCoefficient::of_x(std::function<double(double)> fn, std::string label,
                                          std::vector<double> breakpoints) {
  BreakpointFn bp;
  if (!breakpoints.empty()) bp = [breakpoints](double) { return breakpoints; };
  return {[fn = std::move(fn)](double x, double) { return fn(x); }, std::move(label),
          std::move(bp)};
}

std::vector<double> ScalarCoefficient::breakpoints(double eps) const {
  if (!breakpoints_) return {};
  auto pts = breakpoints_(eps);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

ScalarCoefficient ScalarCoefficient::bind(double eps) const {
  auto fn = fn_;
  BreakpointFn bp;
  if (breakpoints_) {
    auto pts = breakpoints(eps);
    bp = [pts](double) { return pts; };
  }
  return {[fn, eps](double x, double) { return fn(x, eps); }, label_, std::move(bp)};
}

ScalarCoefficient operator+(const ScalarCoefficient& a, const ScalarCoefficient& b) {
  return {[a, b](double x, double eps) { return a(x, eps) + b(x, eps); },
          a.label() + " + " + b.label(), [a, b](double eps) {
            auto pts = a.breakpoints(eps);
            auto more = b.breakpoints(eps);
            pts.insert(pts.end(), more.begin(), more.end());
            return pts;
          }};
}

SkewParam::SkewParam(double beta) : beta_(beta) {
  if (!std::isfinite(beta) || !(std::abs(beta) < 1.0)) {
    throw InvalidSkew("skew parameter must satisfy |beta| < 1, got " + std::to_string(beta));
  }
}

}  // namespace skewlab
