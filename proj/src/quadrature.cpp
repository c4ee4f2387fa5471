#include "skewlab/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "skewlab/errors.hpp"

namespace skewlab {

namespace {

struct Panel {
  double a;
  double b;
  double value;
  double error;
  bool operator<(const Panel& other) const { return error < other.error; }
};

Panel eval_panel(const std::function<double(double)>& f, double a, double b) {
  using Rule = boost::math::quadrature::gauss_kronrod<double, 15>;
  bool finite = true;
  auto guarded = [&](double x) {
    const double v = f(x);
    if (!std::isfinite(v)) finite = false;
    return v;
  };
  double err = 0.0;
  const double v = Rule::integrate(guarded, a, b, 0, 0.0, &err);
  if (!finite) {
    throw QuadratureFailure("integrand is not finite on [" + std::to_string(a) + ", " +
                            std::to_string(b) + "]");
  }
  return Panel{a, b, v, err};
}

}  // namespace

QuadratureResult integrate(const std::function<double(double)>& f, double a, double b,
                           std::span<const double> breakpoints, const QuadratureOptions& opts) {
  if (a == b) return {};
  if (b < a) {
    auto r = integrate(f, b, a, breakpoints, opts);
    r.value = -r.value;
    return r;
  }

  std::vector<double> cuts{a};
  for (double p : breakpoints) {
    if (p > a && p < b) cuts.push_back(p);
  }
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::priority_queue<Panel> heap;
  double total = 0.0;
  double total_err = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    Panel p = eval_panel(f, cuts[i], cuts[i + 1]);
    total += p.value;
    total_err += p.error;
    heap.push(p);
  }

  std::size_t panels = heap.size();
  while (total_err > std::max(opts.atol, opts.rtol * std::abs(total))) {
    if (panels >= opts.max_panels) {
      throw QuadratureFailure("no convergence on [" + std::to_string(a) + ", " +
                              std::to_string(b) + "] within " + std::to_string(opts.max_panels) +
                              " panels (error estimate " + std::to_string(total_err) + ")");
    }
    Panel worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      throw QuadratureFailure("panel width underflow near x = " + std::to_string(worst.a));
    }
    Panel left = eval_panel(f, worst.a, mid);
    Panel right = eval_panel(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++panels;
  }

  // Re-sum to shed the cancellation drift of the running updates.
  double value = 0.0;
  double error = 0.0;
  while (!heap.empty()) {
    value += heap.top().value;
    error += heap.top().error;
    heap.pop();
  }
  return {value, error, panels};
}

double integral(const std::function<double(double)>& f, double a, double b,
                std::span<const double> breakpoints, const QuadratureOptions& opts) {
  return integrate(f, a, b, breakpoints, opts).value;
}

}  // namespace skewlab
