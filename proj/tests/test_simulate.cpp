#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "skewlab/errors.hpp"
#include "skewlab/simulate.hpp"
#include "support.hpp"

using namespace skewlab;

namespace {

std::shared_ptr<const NoiseBlock> noise(std::uint64_t seed, const TimeGrid& grid, std::size_t n,
                                        std::uint64_t stream = 0) {
  return std::make_shared<const NoiseBlock>(gen_noise(seed, grid, n, stream));
}

const ScalarCoefficient kZero = ScalarCoefficient::constant(0.0, "0");
const ScalarCoefficient kOne = ScalarCoefficient::constant(1.0, "1");

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

PathEnsemble constant_paths(double value, const TimeGrid& grid, std::size_t n) {
  PathEnsemble p(grid, n, nullptr, "const");
  for (std::size_t i = 0; i < n; ++i)
    for (auto& x : p.path(i)) x = value;
  return p;
}

}  // namespace

TEST(TimeGrid, EndpointsAndValidation) {
  const TimeGrid g(0.7, 3);
  EXPECT_EQ(g.time(0), 0.0);
  EXPECT_EQ(g.time(3), 0.7);
  EXPECT_DOUBLE_EQ(g.dt(), 0.7 / 3);
  EXPECT_THROW(TimeGrid(0.0, 3), ValidationError);
  EXPECT_THROW(TimeGrid(1.0, 0), ValidationError);
}

TEST(GenNoise, Deterministic) {
  const TimeGrid g(1.0, 4);
  const auto a = gen_noise(7, g, 2);
  const auto b = gen_noise(7, g, 2);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto pa = a.path(i);
    const auto pb = b.path(i);
    EXPECT_TRUE(std::equal(pa.begin(), pa.end(), pb.begin()));
  }
  const auto c = gen_noise(8, g, 2);
  EXPECT_NE(a.path(0)[0], c.path(0)[0]);
  EXPECT_NE(a.path(0)[0], a.path(1)[0]);
  EXPECT_NE(a.path(0)[0], gen_noise(7, g, 1, 1).path(0)[0]);
}

TEST(GenNoise, PathsAreAddressableIndividually) {
  const TimeGrid g(1.0, 16);
  const auto full = gen_noise(3, g, 10);
  const auto tail = gen_noise(3, g, 4, 0, 6);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto a = full.path(6 + i);
    const auto b = tail.path(i);
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
  }
  PathNoise streamed(3, 0, 6, g.dt());
  for (double v : full.path(6)) EXPECT_EQ(streamed.next(), v);
}

TEST(GenNoise, MomentsOfIncrements) {
  const TimeGrid g(100.0, 10000);  // dt = 0.01
  const auto block = gen_noise(11, g, 100);
  double s = 0.0;
  double s2 = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < block.n_paths(); ++i)
    for (double v : block.path(i)) {
      s += v;
      s2 += v * v;
      ++n;
    }
  ASSERT_EQ(n, 1000000u);
  const double m = s / n;
  const double var = s2 / n - m * m;
  EXPECT_NEAR(m, 0.0, 3e-4);
  EXPECT_NEAR(var, 0.01, 1e-4);
}

TEST(EulerMaruyama, NoDynamicsKeepsInitialValue) {
  const TimeGrid g(1.0, 50);
  const auto p = euler_maruyama(kZero, kZero, 0.3, g, noise(1, g, 3));
  for (std::size_t i = 0; i < 3; ++i)
    for (double x : p.path(i)) EXPECT_EQ(x, 0.3);
}

TEST(EulerMaruyama, UnitDriftIsExact) {
  const TimeGrid g(1.0, 8);
  const auto p = euler_maruyama(kOne, kZero, 0.25, g, noise(1, g, 2));
  EXPECT_EQ(p.terminal()[0], 1.25);
  EXPECT_EQ(p.path(1)[0], 0.25);
}

TEST(EulerMaruyama, BrownianVariance) {
  const TimeGrid g(1.0, 10);
  const auto p = euler_maruyama(kZero, kOne, 0.0, g, noise(5, g, 100000));
  EXPECT_NEAR(variance(p.terminal()), 1.0, 0.02);
}

TEST(EulerMaruyama, NonFiniteStateIsReported) {
  const TimeGrid g(1.0, 200);
  const auto blowup = ScalarCoefficient::of_x([](double x) { return x * x * 1e10 + 1e300; }, "big");
  EXPECT_THROW(euler_maruyama(blowup, kZero, 1.0, g, noise(1, g, 2)), NonFiniteState);
}

TEST(EulerMaruyama, RejectsMismatchedNoise) {
  EXPECT_THROW(euler_maruyama(kZero, kOne, 0.0, TimeGrid(1.0, 10), noise(1, TimeGrid(1.0, 20), 2)),
               ValidationError);
}

TEST(EulerMaruyama, StreamingKernelMatches) {
  const TimeGrid g(1.0, 64);
  const auto drift = ScalarCoefficient::of_x([](double x) { return -x; }, "ou");
  const auto p = euler_maruyama(drift, kOne, 0.5, g, noise(9, g, 3));
  for (std::size_t i = 0; i < 3; ++i) {
    PathNoise dw(9, 0, i, g.dt());
    std::vector<double> xs;
    run_euler_path(drift, kOne, 0.5, g, dw, i, [&](std::size_t, double x) { xs.push_back(x); });
    const auto ref = p.path(i);
    EXPECT_TRUE(std::equal(xs.begin(), xs.end(), ref.begin()));
  }
}

TEST(SkewSde, ZeroSkewIsPlainEuler) {
  const TimeGrid g(1.0, 200);
  const auto n = noise(4, g, 20);
  const auto drift = ScalarCoefficient::of_x([](double x) { return std::sin(x); }, "sin");
  const auto a = simulate_skew_sde(SkewParam(0.0), drift, kOne, 0.3, g, n);
  const auto b = euler_maruyama(drift, kOne, 0.3, g, n);
  for (std::size_t i = 0; i < 20; ++i) {
    const auto pa = a.path(i);
    const auto pb = b.path(i);
    EXPECT_TRUE(std::equal(pa.begin(), pa.end(), pb.begin()));
  }
}

TEST(SkewSde, SignLawAndExpectationBalance) {
  const TimeGrid g(1.0, 1000);
  const double beta = 0.5;
  const auto p = simulate_skew_sde(SkewParam(beta), kZero, kOne, 0.0, g, noise(21, g, 20000));
  const auto xi = p.terminal();
  const double pos =
      static_cast<double>(std::count_if(xi.begin(), xi.end(), [](double x) { return x > 0; })) /
      xi.size();
  EXPECT_NEAR(pos, 0.75, 0.02);

  const auto lt = estimate_local_time(p, kOne, default_bandwidth(g));
  const double lhs = mean(xi);
  const double rhs = beta * mean(lt.terminal());
  const double se = std::sqrt(variance(xi) / xi.size());
  EXPECT_NEAR(lhs, rhs, 3 * se + 0.02);
}

// Excursion sign flips of |W| give exact skew-BM grid paths.
TEST(SkewSde, ExcursionFlipOracleBalances) {
  const TimeGrid g(1.0, 1000);
  const double beta = 0.5;
  const auto w = euler_maruyama(kZero, kOne, 0.0, g, noise(22, g, 20000));
  PathEnsemble xi(g, w.n_paths(), nullptr, "flip");
  std::mt19937_64 gen(23);
  std::bernoulli_distribution up((1 + beta) / 2);
  for (std::size_t i = 0; i < w.n_paths(); ++i) {
    const auto src = w.path(i);
    auto dst = xi.path(i);
    double sign = up(gen) ? 1.0 : -1.0;
    for (std::size_t k = 0; k < src.size(); ++k) {
      if (k > 0 && (src[k] == 0.0 || (src[k] > 0) != (src[k - 1] > 0))) sign = up(gen) ? 1.0 : -1.0;
      dst[k] = sign * std::fabs(src[k]);
    }
  }
  const auto t = xi.terminal();
  const double pos =
      static_cast<double>(std::count_if(t.begin(), t.end(), [](double x) { return x > 0; })) /
      t.size();
  EXPECT_NEAR(pos, 0.75, 0.02);
  const auto lt = estimate_local_time(xi, kOne, default_bandwidth(g));
  const double se = std::sqrt(variance(t) / t.size());
  EXPECT_NEAR(mean(t), beta * mean(lt.terminal()), 3 * se + 0.02);
}

TEST(SkewSde, InvalidSkewRejected) { EXPECT_THROW(SkewParam(1.5), InvalidSkew); }

TEST(LocalTime, NeverNearOrigin) {
  const TimeGrid g(1.0, 100);
  const auto lt = estimate_local_time(constant_paths(5.0, g, 2), kOne, default_bandwidth(g));
  for (const auto& path : lt.values)
    for (double v : path) EXPECT_EQ(v, 0.0);
}

TEST(LocalTime, AlwaysAtOrigin) {
  const TimeGrid g(1.0, 100);
  const double delta = default_bandwidth(g);
  const auto lt = estimate_local_time(constant_paths(0.0, g, 2), kOne, delta);
  EXPECT_NEAR(lt.terminal()[0], 1.0 / (2 * delta), 1e-12);
  EXPECT_EQ(lt.values[0][0], 0.0);
}

TEST(LocalTime, BandwidthFloor) {
  const TimeGrid g(1.0, 100);
  EXPECT_THROW(estimate_local_time(constant_paths(0.0, g, 1), kOne, 0.05), BandwidthTooSmall);
  EXPECT_NO_THROW(estimate_local_time(constant_paths(0.0, g, 1), kOne, 0.1));
  EXPECT_THROW(estimate_local_time(constant_paths(0.0, g, 1), kOne, 0.0), BandwidthTooSmall);
  // sigma only matters inside the window
  const auto wild = ScalarCoefficient::of_x([](double x) { return std::abs(x) > 1 ? 100.0 : 1.0; }, "w");
  EXPECT_NO_THROW(estimate_local_time(constant_paths(5.0, g, 1), wild, 0.1));
}

TEST(LocalTime, MonotoneNonnegativeAndOccupationIdentity) {
  const TimeGrid g(1.0, 2000);
  const auto p = euler_maruyama(kZero, kOne, 0.0, g, noise(2, g, 200));
  const double delta = default_bandwidth(g);
  const double sigma = 1.3;
  const auto lt = estimate_local_time(p, ScalarCoefficient::constant(sigma), delta);
  for (std::size_t i = 0; i < p.n_paths(); ++i) {
    const auto& v = lt.values[i];
    for (std::size_t k = 1; k < v.size(); ++k) EXPECT_GE(v[k], v[k - 1]);
    EXPECT_GE(v.front(), 0.0);
    double occupation = 0.0;
    const auto x = p.path(i);
    for (std::size_t k = 0; k < g.n_steps(); ++k)
      if (std::abs(x[k]) < delta) occupation += g.dt();
    EXPECT_NEAR(occupation, 2 * delta * v.back() / (sigma * sigma), 1e-12);
  }
}

TEST(LocalTime, BrownianMeanCoarse) {
  const TimeGrid g(1.0, 1000);
  const auto p = euler_maruyama(kZero, kOne, 0.0, g, noise(13, g, 20000));
  const double m = mean(estimate_local_time(p, kOne, default_bandwidth(g)).terminal());
  EXPECT_NEAR(m, std::sqrt(2 / M_PI), 0.04 * std::sqrt(2 / M_PI));
}

namespace {

CoefficientFamily plain_family(double b_scale) {
  FamilyParts parts;
  parts.b_eps = ScalarCoefficient(
      [b_scale](double x, double eps) { return std::abs(x) <= eps ? b_scale / (2 * eps) : 0.0; },
      "b", [](double eps) { return std::vector<double>{-eps, eps}; });
  parts.g_eps = kZero;
  parts.sigma_eps = kOne;
  parts.limit_g = kZero;
  parts.limit_sigma = kOne;
  return CoefficientFamily(parts, {0.1});
}

}  // namespace

TEST(EpsFamily, DriftlessIsBrownian) {
  const TimeGrid g(1.0, 1000);
  const auto n = noise(3, g, 5);
  const auto a = simulate_eps_family(plain_family(0.0), 0.1, 0.0, g, n);
  const auto b = euler_maruyama(kZero, kOne, 0.0, g, n);
  for (std::size_t i = 0; i < 5; ++i) {
    const auto pa = a.path(i);
    const auto pb = b.path(i);
    EXPECT_TRUE(std::equal(pa.begin(), pa.end(), pb.begin()));
  }
}

TEST(EpsFamily, StepRule) {
  const auto fam = plain_family(1.0);
  const TimeGrid coarse(1.0, 999);
  EXPECT_THROW(simulate_eps_family(fam, 0.1, 0.0, coarse, noise(1, coarse, 1)), StepTooCoarse);
  const TimeGrid fine(1.0, 1000);
  EXPECT_NO_THROW(simulate_eps_family(fam, 0.1, 0.0, fine, noise(1, fine, 1)));
  EXPECT_DOUBLE_EQ(max_layer_step(0.1), 1e-3);
}

TEST(EpsFamily, SignProbabilityMovesTowardLimit) {
  const auto fam = plain_family(1.0);
  const TimeGrid g(1.0, 4000);
  const auto p = simulate_eps_family(fam, 0.05, 0.0, g, noise(17, g, 10000));
  const auto v = p.terminal();
  const double pos =
      static_cast<double>(std::count_if(v.begin(), v.end(), [](double x) { return x > 0; })) /
      v.size();
  // Limit (1 + tanh 1)/2 = 0.8808; eps = 0.05 sits close to it.
  EXPECT_GT(pos, 0.84);
  EXPECT_LT(pos, 0.90);
}

TEST(TransformEnsemble, Examples) {
  const TimeGrid g(1.0, 50);
  const auto n = noise(6, g, 4);
  const auto p = euler_maruyama(kZero, kOne, 0.1, g, n);
  const auto same = transform_ensemble(p, [](double x) { return x; }, "id");
  EXPECT_EQ(same.noise(), p.noise());
  const SkewParam b(0.5);
  const auto there = transform_ensemble(p, [b](double x) { return kappa(b, x); }, "k");
  const auto back = transform_ensemble(there, [b](double x) { return phi(b, x); }, "p");
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t k = 0; k < p.n_points(); ++k) {
      EXPECT_EQ(same.path(i)[k], p.path(i)[k]);
      EXPECT_NEAR(back.path(i)[k], p.path(i)[k], 1e-15);
    }
  const auto u = PiecewiseC2::linear(1.0, 2.0);
  const auto two = transform_ensemble(constant_paths(1.0, g, 1), [&u](double x) { return u(x); }, "u");
  for (double x : two.path(0)) EXPECT_EQ(x, 2.0);
  EXPECT_THROW(transform_ensemble(p, [](double) { return NAN; }, "nan"), NonFiniteState);
}

TEST(ParallelFor, IndependentOfThreadCountAndReportsLowestFailure) {
  std::vector<double> a(1000), b(1000);
  auto work = [](std::vector<double>& out) {
    return [&out](std::size_t i) {
      PathNoise n(1, 2, i, 1.0);
      out[i] = n.next();
    };
  };
  parallel_for(a.size(), work(a), 1);
  parallel_for(b.size(), work(b), 4);
  EXPECT_EQ(a, b);
  try {
    parallel_for(
        100,
        [](std::size_t i) {
          if (i % 7 == 3) throw std::runtime_error(std::to_string(i));
        },
        4);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "3");
  }
}
