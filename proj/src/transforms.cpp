#include "skewlab/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>
#include <string>

#include "skewlab/errors.hpp"

namespace skewlab {

namespace {

// Uniform knot lattice spacing and extent; powers of two beyond.
constexpr double kLatticeStep = 0.25;
constexpr double kLatticeExtent = 16.0;
constexpr double kSearchScale = 1e10;
constexpr double kInvertAtol = 1e-12;

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

double kappa(SkewParam beta, double x) noexcept {
  return x < 0.0 ? (1.0 - beta.value()) * x : (1.0 + beta.value()) * x;
}

double phi(SkewParam beta, double x) noexcept {
  return x < 0.0 ? x / (1.0 - beta.value()) : x / (1.0 + beta.value());
}

ScalarCoefficient tilde_coeff(const ScalarCoefficient& f, SkewParam beta) {
  return {[f, beta](double x, double eps) {
            return f(kappa(beta, x), eps) / (1.0 + beta.value() * sgn(x));
          },
          "tilde(" + f.label() + ")", [f, beta](double eps) {
            std::vector<double> pts{0.0};
            for (double p : f.breakpoints(eps)) pts.push_back(phi(beta, p));
            return pts;
          }};
}

// ---------------------------------------------------------------------------
// ScaleFunction

ScaleFunction::ScaleFunction(ScalarCoefficient drift, ScalarCoefficient diffusion, double eps,
                             QuadratureOptions quad)
    : drift_(std::move(drift)), diffusion_(std::move(diffusion)), eps_(eps), quad_(quad) {
  breakpoints_ = drift_.breakpoints(eps_);
  auto more = diffusion_.breakpoints(eps_);
  breakpoints_.insert(breakpoints_.end(), more.begin(), more.end());
  breakpoints_.push_back(0.0);
  std::sort(breakpoints_.begin(), breakpoints_.end());
  breakpoints_.erase(std::unique(breakpoints_.begin(), breakpoints_.end()), breakpoints_.end());

  right_.push_back({0.0, 0.0, 0.0});
  left_.push_back({0.0, 0.0, 0.0});
  double reach = kLatticeExtent;
  for (double p : breakpoints_) reach = std::max(reach, std::abs(p));
  std::unique_lock lock(mutex_);
  extend_locked(right_, reach, 1.0);
  extend_locked(left_, reach, -1.0);
}

double ScaleFunction::ratio(double y) const {
  const double s = diffusion_(y, eps_);
  return drift_(y, eps_) / (s * s);
}

double ScaleFunction::next_lattice(double at, double dir) const {
  // at >= 0 is the distance already covered on this side.
  double next;
  if (at < kLatticeExtent) {
    next = std::min(kLatticeExtent, (std::floor(at / kLatticeStep) + 1.0) * kLatticeStep);
  } else {
    next = std::exp2(std::floor(std::log2(at)) + 1.0);
    if (next <= at) next *= 2.0;
  }
  for (double p : breakpoints_) {
    const double d = dir * p;
    if (d > at && d < next) next = d;
  }
  return next;
}

double ScaleFunction::local_exponent(const Knot& k, double x) const {
  if (x == k.x) return k.exponent;
  return k.exponent + integral([this](double y) { return ratio(y); }, k.x, x, {}, quad_);
}

double ScaleFunction::local_value(const Knot& k, double x) const {
  if (x == k.x) return k.value;
  auto F = [this, &k](double y) { return std::exp(-2.0 * local_exponent(k, y)); };
  return k.value + integral(F, k.x, x, {}, quad_);
}

void ScaleFunction::extend_locked(std::vector<Knot>& side, double reach, double dir) const {
  while (std::abs(side.back().x) < reach) {
    const Knot& last = side.back();
    const double next_abs = next_lattice(std::abs(last.x), dir);
    if (!std::isfinite(next_abs)) break;
    const double x = dir * next_abs;
    Knot k{x, local_exponent(last, x), local_value(last, x)};
    side.push_back(k);
  }
}

ScaleFunction::Located ScaleFunction::locate(double x) const {
  auto& side = x < 0.0 ? left_ : right_;
  const double a = std::abs(x);
  auto find = [&]() {
    // Last knot with |knot| <= a.
    auto it = std::upper_bound(side.begin(), side.end(), a,
                               [](double v, const Knot& k) { return v < std::abs(k.x); });
    const auto idx = static_cast<std::size_t>(std::distance(side.begin(), it)) - 1;
    Located loc{side[idx], side[idx], false};
    if (idx + 1 < side.size()) {
      loc.next = side[idx + 1];
      loc.has_next = true;
    }
    return loc;
  };
  {
    std::shared_lock lock(mutex_);
    if (std::abs(side.back().x) > a) return find();
  }
  std::unique_lock lock(mutex_);
  extend_locked(side, std::nextafter(a, std::numeric_limits<double>::infinity()),
                x < 0.0 ? -1.0 : 1.0);
  return find();
}

double ScaleFunction::exponent(double x) const {
  const auto loc = locate(x);
  return local_exponent(loc.knot, x);
}

double ScaleFunction::density(double x) const {
  if (x == 0.0) return 1.0;
  return std::exp(-2.0 * exponent(x));
}

double ScaleFunction::operator()(double x) const {
  if (x == 0.0) return 0.0;
  const auto loc = locate(x);
  return local_value(loc.knot, x);
}

double ScaleFunction::inverse(double y) const {
  if (!std::isfinite(y)) throw NoBracket("cannot invert a non-finite value");
  if (y == 0.0) return 0.0;
  const double dir = y > 0.0 ? 1.0 : -1.0;
  const double limit = kSearchScale * (1.0 + std::abs(y));

  // Walk the knot table outward until the target value is passed.
  Knot lo{0.0, 0.0, 0.0};
  Knot hi{0.0, 0.0, 0.0};
  double probe = kLatticeStep;
  for (;;) {
    auto loc = locate(dir * probe);
    if (dir * loc.knot.value >= std::abs(y)) {
      // Rescan from the start of the table for the first knot past y.
      std::shared_lock lock(mutex_);
      const auto& side = dir > 0.0 ? right_ : left_;
      auto it = std::find_if(side.begin(), side.end(),
                             [&](const Knot& k) { return dir * k.value >= std::abs(y); });
      hi = *it;
      lo = *(it - 1);
      break;
    }
    if (probe >= limit) {
      throw NoBracket("value " + num(y) + " is outside the range of the scale function on [" +
                      num(-limit) + ", " + num(limit) + "]");
    }
    probe = std::min(2.0 * probe, limit);
  }

  const double tol = std::max(kInvertAtol, 4.0 * std::numeric_limits<double>::epsilon() * std::abs(y));
  double a = lo.x;
  double b = hi.x;
  if (a > b) std::swap(a, b);
  double x = lo.x + (hi.x - lo.x) * (y - lo.value) / (hi.value - lo.value);
  double best_x = x;
  double best_res = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 200; ++it) {
    const double res = local_value(lo, x) - y;
    if (std::abs(res) < best_res) {
      best_res = std::abs(res);
      best_x = x;
    }
    if (std::abs(res) <= tol) return x;
    if (res < 0.0) {
      a = x;
    } else {
      b = x;
    }
    if (b - a <= 2.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(a), std::abs(b))) {
      break;
    }
    double next = x - res / density(x);
    if (!std::isfinite(next) || next <= a || next >= b) next = 0.5 * (a + b);
    x = next;
  }
  return best_x;
}

// ---------------------------------------------------------------------------
// CoefficientFamily

CoefficientFamily::CoefficientFamily(FamilyParts parts, std::vector<double> eps_ladder,
                                     ClassGrid grid)
    : parts_(std::move(parts)), ladder_(std::move(eps_ladder)), cache_(std::make_shared<Cache>()) {
  validate(grid);
}

std::vector<double> CoefficientFamily::breakpoints(double eps) const {
  std::vector<double> pts{0.0};
  for (const auto* c : {&parts_.b_eps, &parts_.g_eps, &parts_.sigma_eps}) {
    auto more = c->breakpoints(eps);
    pts.insert(pts.end(), more.begin(), more.end());
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

void CoefficientFamily::validate(const ClassGrid& grid) const {
  const double lam = parts_.lambda_bound;
  const double Lam = parts_.Lambda_bound;
  if (!(lam > 0.0) || !(lam <= Lam) || !std::isfinite(Lam)) {
    throw ValidationError("class bounds must satisfy 0 < lambda <= Lambda < inf, got lambda = " +
                          num(lam) + ", Lambda = " + num(Lam));
  }
  if (grid.points < 2 || !(grid.lo < 0.0 && grid.hi > 0.0)) {
    throw ValidationError("class grid must straddle the origin with at least two points");
  }
  auto sample_points = [&](std::vector<double> extra) {
    std::vector<double> pts;
    pts.reserve(grid.points + extra.size() + 1);
    for (std::size_t i = 0; i < grid.points; ++i) {
      pts.push_back(grid.lo + (grid.hi - grid.lo) * static_cast<double>(i) /
                                  static_cast<double>(grid.points - 1));
    }
    pts.push_back(0.0);
    for (double p : extra) {
      if (p >= grid.lo && p <= grid.hi) pts.push_back(p);
    }
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
  };
  auto check_pair = [&](const ScalarCoefficient& g, const ScalarCoefficient& s, double eps,
                        const std::vector<double>& pts, const std::string& what) {
    for (double x : pts) {
      const double gv = g(x, eps);
      const double sv = s(x, eps);
      const double a = sv * sv;
      if (!std::isfinite(gv) || std::abs(gv) > Lam) {
        throw ValidationError(what + ": |g(x)| = " + num(std::abs(gv)) + " exceeds Lambda = " +
                              num(Lam) + " at x = " + num(x));
      }
      if (!std::isfinite(a) || a < lam || a > Lam) {
        throw ValidationError(what + ": sigma(x)^2 = " + num(a) + " outside [lambda, Lambda] = [" +
                              num(lam) + ", " + num(Lam) + "] at x = " + num(x));
      }
    }
  };

  {
    auto extra = parts_.limit_g.breakpoints();
    auto more = parts_.limit_sigma.breakpoints();
    extra.insert(extra.end(), more.begin(), more.end());
    check_pair(parts_.limit_g, parts_.limit_sigma, 0.0, sample_points(extra), "limit coefficients");
  }

  for (double eps : ladder_) {
    if (!(eps > 0.0) || !std::isfinite(eps)) {
      throw ValidationError("eps values must be positive and finite, got " + num(eps));
    }
    const auto bps = breakpoints(eps);
    const auto pts = sample_points(bps);
    const std::string what = "eps = " + num(eps);
    check_pair(parts_.g_eps, parts_.sigma_eps, eps, pts, what);

    auto ratio = [&](double y) {
      const double s = parts_.sigma_eps(y, eps);
      return parts_.b_eps(y, eps) / (s * s);
    };
    const auto zero = static_cast<std::size_t>(
        std::distance(pts.begin(), std::find(pts.begin(), pts.end(), 0.0)));
    auto sweep = [&](std::size_t from, int step) {
      double acc = 0.0;
      for (std::size_t i = from; i < pts.size();) {
        const std::size_t j = i + static_cast<std::size_t>(step);
        if (j >= pts.size()) break;
        acc += integral(ratio, pts[i], pts[j]);
        if (!std::isfinite(acc) || std::abs(acc) > Lam) {
          throw ValidationError(what + ": |int_0^x b/sigma^2| = " + num(std::abs(acc)) +
                                " exceeds Lambda = " + num(Lam) + " at x = " + num(pts[j]));
        }
        i = j;
      }
    };
    sweep(zero, 1);
    sweep(zero, -1);  // wraps to a huge index at the left end and stops
  }
}

std::shared_ptr<const ScaleFunction> CoefficientFamily::scale(double eps) const {
  {
    std::shared_lock lock(cache_->mutex);
    auto it = cache_->by_eps.find(eps);
    if (it != cache_->by_eps.end()) return it->second;
  }
  std::unique_lock lock(cache_->mutex);
  auto& slot = cache_->by_eps[eps];
  if (!slot) slot = std::make_shared<const ScaleFunction>(parts_.b_eps, parts_.sigma_eps, eps);
  return slot;
}

double scale_density(const CoefficientFamily& fam, double eps, double x) {
  return fam.scale(eps)->density(x);
}

double scale_function(const CoefficientFamily& fam, double eps, double x) {
  return (*fam.scale(eps))(x);
}

double scale_inverse(const CoefficientFamily& fam, double eps, double y) {
  return fam.scale(eps)->inverse(y);
}

double alpha_limit(double f1, double f2) {
  if (!(f1 > 0.0) || !(f2 > 0.0)) {
    throw ValidationError("scale slopes must be positive, got f1 = " + num(f1) +
                          ", f2 = " + num(f2));
  }
  return (f1 - f2) / (f1 + f2);
}

PiecewiseC2 compose_tau(const PiecewiseC2& u, SkewParam beta) {
  auto branch = [](const SmoothBranch& b, double k) {
    return SmoothBranch{[e = b.eval, k](double x) { return e(k * x); },
                        [d = b.d1, k](double x) { return k * d(k * x); },
                        [d = b.d2, k](double x) { return k * k * d(k * x); }, b.side};
  };
  return PiecewiseC2(branch(u.left(), 1.0 - beta.value()), branch(u.right(), 1.0 + beta.value()));
}

std::pair<ScalarCoefficient, ScalarCoefficient> hat_coeffs(const CoefficientFamily& fam,
                                                           double eps) {
  auto scale = fam.scale(eps);
  auto g = fam.g_eps();
  auto s = fam.sigma_eps();
  ScalarCoefficient g_hat(
      [scale, g, eps](double x, double) {
        const double v = scale->inverse(x);
        return scale->density(v) * g(v, eps);
      },
      "hat(" + g.label() + ")");
  ScalarCoefficient s_hat(
      [scale, s, eps](double x, double) {
        const double v = scale->inverse(x);
        return scale->density(v) * s(v, eps);
      },
      "hat(" + s.label() + ")");
  return {std::move(g_hat), std::move(s_hat)};
}

std::pair<ScalarCoefficient, ScalarCoefficient> star_coeffs(const PiecewiseC2& u,
                                                            const ScalarCoefficient& g,
                                                            const ScalarCoefficient& sigma) {
  auto mapped = [u](const ScalarCoefficient& c) {
    return [u, c](double eps) {
      std::vector<double> pts{0.0};
      for (double p : c.breakpoints(eps)) pts.push_back(u(p));
      return pts;
    };
  };
  ScalarCoefficient g_star(
      [u, g, sigma](double x, double eps) {
        const double v = invert(u, x);
        const double s = sigma(v, eps);
        return sym_deriv(u, v) * g(v, eps) + 0.5 * s * s * curvature_density(u, v);
      },
      "star(" + g.label() + ")", [u, g, sigma](double eps) {
        std::vector<double> pts{0.0};
        for (const auto* c : {&g, &sigma}) {
          for (double p : c->breakpoints(eps)) pts.push_back(u(p));
        }
        return pts;
      });
  ScalarCoefficient sigma_star(
      [u, sigma](double x, double eps) {
        const double v = invert(u, x);
        return sym_deriv(u, v) * sigma(v, eps);
      },
      "star(" + sigma.label() + ")", mapped(sigma));
  return {std::move(g_star), std::move(sigma_star)};
}

}  // namespace skewlab
