#pragma once

#include <map>
#include <memory>
#include <shared_mutex>
#include <utility>
#include <vector>

#include "skewlab/coefficients.hpp"
#include "skewlab/piecewise.hpp"
#include "skewlab/quadrature.hpp"

namespace skewlab {

/// Skew map: (1 - beta) x for x < 0, (1 + beta) x for x >= 0.
double kappa(SkewParam beta, double x) noexcept;
/// Inverse of kappa.
double phi(SkewParam beta, double x) noexcept;

/// x -> f(kappa(x)) / (1 + beta sgn x). Breakpoints are pulled back by phi
/// and the origin is added.
ScalarCoefficient tilde_coeff(const ScalarCoefficient& f, SkewParam beta);

/// Scale density F(x) = exp(-2 int_0^x b/sigma^2) and scale function
/// f(x) = int_0^x F for one fixed eps.
///
/// Cumulative values are kept at a fixed knot set (the origin, every
/// breakpoint, a uniform lattice near the origin and powers of two further
/// out), so each query costs one local integral from the nearest knot. The
/// knot table grows on demand; since the knot set and the order in which it
/// is filled do not depend on query history, concurrent and sequential
/// evaluation agree bit for bit.
class ScaleFunction {
 public:
  ScaleFunction(ScalarCoefficient drift, ScalarCoefficient diffusion, double eps,
                QuadratureOptions quad = {});

  /// int_0^x b(y) / sigma^2(y) dy
  double exponent(double x) const;
  /// F(x)
  double density(double x) const;
  /// f(x)
  double operator()(double x) const;
  /// f^{-1}(y); throws NoBracket if y is out of reach.
  double inverse(double y) const;

  double eps() const noexcept { return eps_; }
  /// Breakpoints of the integrand, including the origin.
  const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }

 private:
  struct Knot {
    double x;
    double exponent;
    double value;
  };
  struct Located {
    Knot knot;
    Knot next;
    bool has_next;
  };

  double ratio(double y) const;
  double local_exponent(const Knot& k, double x) const;
  double local_value(const Knot& k, double x) const;
  Located locate(double x) const;
  void extend_locked(std::vector<Knot>& side, double reach, double dir) const;
  double next_lattice(double at, double dir) const;

  ScalarCoefficient drift_;
  ScalarCoefficient diffusion_;
  double eps_;
  QuadratureOptions quad_;
  std::vector<double> breakpoints_;

  mutable std::shared_mutex mutex_;
  mutable std::vector<Knot> right_;
  mutable std::vector<Knot> left_;
};

struct ClassGrid {
  double lo = -10.0;
  double hi = 10.0;
  std::size_t points = 2001;
};

/// Parts of an eps-family together with its limit data.
struct FamilyParts {
  ScalarCoefficient b_eps;
  ScalarCoefficient g_eps;
  ScalarCoefficient sigma_eps;
  ScalarCoefficient limit_g;
  ScalarCoefficient limit_sigma;
  PiecewiseC2 limit_f = PiecewiseC2::identity();
  double lambda_bound = 1.0;
  double Lambda_bound = 1.0;
};

/// Validated coefficient family (b_eps, g_eps, sigma_eps) with limit
/// (g, sigma, f).
///
/// Construction checks, on a finite grid plus declared breakpoints and for
/// every eps of the ladder, that |g_eps| <= Lambda, lambda <= sigma_eps^2 <=
/// Lambda, |int_0^x b_eps / sigma_eps^2| <= Lambda, and the same bounds for
/// the limit pair. Violations throw ValidationError naming the offending
/// point.
class CoefficientFamily {
 public:
  CoefficientFamily(FamilyParts parts, std::vector<double> eps_ladder, ClassGrid grid = {});

  const ScalarCoefficient& b_eps() const noexcept { return parts_.b_eps; }
  const ScalarCoefficient& g_eps() const noexcept { return parts_.g_eps; }
  const ScalarCoefficient& sigma_eps() const noexcept { return parts_.sigma_eps; }
  const ScalarCoefficient& limit_g() const noexcept { return parts_.limit_g; }
  const ScalarCoefficient& limit_sigma() const noexcept { return parts_.limit_sigma; }
  const PiecewiseC2& limit_f() const noexcept { return parts_.limit_f; }
  double lambda_bound() const noexcept { return parts_.lambda_bound; }
  double Lambda_bound() const noexcept { return parts_.Lambda_bound; }
  const std::vector<double>& eps_ladder() const noexcept { return ladder_; }

  /// Shared, lazily built scale function for this eps.
  std::shared_ptr<const ScaleFunction> scale(double eps) const;

  /// Breakpoints of b, g and sigma at eps, with the origin.
  std::vector<double> breakpoints(double eps) const;

 private:
  struct Cache {
    std::shared_mutex mutex;
    std::map<double, std::shared_ptr<const ScaleFunction>> by_eps;
  };

  void validate(const ClassGrid& grid) const;

  FamilyParts parts_;
  std::vector<double> ladder_;
  std::shared_ptr<Cache> cache_;
};

double scale_density(const CoefficientFamily& fam, double eps, double x);
double scale_function(const CoefficientFamily& fam, double eps, double x);
double scale_inverse(const CoefficientFamily& fam, double eps, double y);

/// (f1 - f2) / (f1 + f2) for positive slopes.
double alpha_limit(double f1, double f2);

/// tau = u o kappa as a piecewise map with slopes (1-beta) u1 and (1+beta) u2.
PiecewiseC2 compose_tau(const PiecewiseC2& u, SkewParam beta);

/// Drift and diffusion of f_eps(v_eps): F(f^{-1}(x)) g_eps(f^{-1}(x)) and
/// F(f^{-1}(x)) sigma_eps(f^{-1}(x)) at fixed eps.
std::pair<ScalarCoefficient, ScalarCoefficient> hat_coeffs(const CoefficientFamily& fam,
                                                           double eps);

/// Drift and diffusion of u(xi):
///   g*(x) = Du(v) g(v) + sigma(v)^2 / 2 * A_u(v),  sigma*(x) = Du(v) sigma(v)
/// with v = u^{-1}(x).
std::pair<ScalarCoefficient, ScalarCoefficient> star_coeffs(const PiecewiseC2& u,
                                                            const ScalarCoefficient& g,
                                                            const ScalarCoefficient& sigma);

}  // namespace skewlab
