#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "skewlab/convergence.hpp"
#include "skewlab/errors.hpp"
#include "support.hpp"

using namespace skewlab;
using skewlab::testing::curved_map;

namespace {

const double kE = std::exp(1.0);
const ScalarCoefficient kZero = ScalarCoefficient::constant(0.0, "0");
const ScalarCoefficient kOne = ScalarCoefficient::constant(1.0, "1");

FamilyParts indicator_parts(PiecewiseC2 f) {
  FamilyParts p;
  p.b_eps = ScalarCoefficient(
      [](double x, double eps) { return (-eps <= x && x <= eps) ? 1.0 / (2 * eps) : 0.0; }, "b",
      [](double eps) { return std::vector<double>{-eps, eps}; });
  p.g_eps = kZero;
  p.sigma_eps = kOne;
  p.limit_g = kZero;
  p.limit_sigma = kOne;
  p.limit_f = std::move(f);
  return p;
}

FamilyParts trivial_parts() {
  FamilyParts p;
  p.b_eps = kZero;
  p.g_eps = kZero;
  p.sigma_eps = kOne;
  p.limit_g = kZero;
  p.limit_sigma = kOne;
  return p;
}

std::vector<double> normals(std::uint64_t seed, std::size_t n, double shift = 0.0) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> d(shift, 1.0);
  std::vector<double> out(n);
  for (auto& v : out) v = d(gen);
  return out;
}

// Closed form of int_0^x dy / F_eps(y) for the c = 1 indicator family.
double oracle_aa_lhs(double eps, double x) {
  const double m = std::clamp(x, -eps, eps);
  return eps * std::expm1(m / eps) + (x - m) * std::exp(m / eps);
}

}  // namespace

TEST(ConditionA, Examples) {
  EXPECT_EQ(check_condition_a(PiecewiseC2::identity(), 0.0), 0.0);
  EXPECT_LE(check_condition_a(PiecewiseC2::linear(kE, 1 / kE), std::tanh(1.0)), 1e-15);
  EXPECT_DOUBLE_EQ(check_condition_a(PiecewiseC2::linear(3.0, 1.0), 0.0), 0.5);
}

TEST(ConditionA, ClosesOnItself) {
  for (double f1 : {0.1, 1.0, 2.5, 40.0})
    for (double f2 : {0.2, 1.0, 9.0}) {
      const auto f = PiecewiseC2::linear(f1, f2);
      EXPECT_LE(check_condition_a(f, alpha_limit(f1, f2)), 1e-16);
    }
}

TEST(ConditionAA, TrivialFamilyIsExact) {
  const CoefficientFamily fam(trivial_parts(), {0.2, 0.1});
  const std::vector<double> xs{-1.0, -0.5, 0.5, 1.0};
  const auto rows = check_condition_aa(fam, fam.eps_ladder(), xs);
  ASSERT_EQ(rows.size(), 8u);
  for (const auto& r : rows) EXPECT_EQ(r.residual, 0.0);
  for (const auto& r : check_condition_aaa(fam, fam.eps_ladder(), xs)) EXPECT_EQ(r.residual, 0.0);
}

TEST(ConditionAA, IndicatorFamilyMatchesClosedForm) {
  const CoefficientFamily fam(indicator_parts(PiecewiseC2::linear(kE, 1 / kE)), {0.2, 0.02, 1e-3});
  const std::vector<double> xs{-1.0, -0.5, -0.01, 0.01, 0.5, 1.0};
  for (const auto& r : check_condition_aa(fam, fam.eps_ladder(), xs)) {
    EXPECT_NEAR(r.lhs, oracle_aa_lhs(r.eps, r.x), 1e-10);
    EXPECT_NEAR(r.rhs, r.x < 0 ? r.x / kE : kE * r.x, 1e-12);
  }
  const std::vector<double> one{1.0};
  const auto fine = check_condition_aa(fam, std::vector<double>{1e-3}, one);
  EXPECT_LT(fine[0].residual, 1e-2);
  EXPECT_NEAR(fine[0].residual, 1e-3, 1e-10);
}

TEST(ConditionAA, WrongLimitStaysAway) {
  const CoefficientFamily fam(indicator_parts(PiecewiseC2::identity()), {1e-3});
  const std::vector<double> one{1.0};
  const auto rows = check_condition_aa(fam, fam.eps_ladder(), one);
  EXPECT_NEAR(rows[0].residual, kE - 1 - 1e-3, 1e-9);
  EXPECT_GT(rows[0].residual, 1.0);
}

TEST(ConditionAAA, Examples) {
  const std::vector<double> xs{-1.0, -0.5, 0.5, 1.0};
  {
    const CoefficientFamily fam(indicator_parts(PiecewiseC2::linear(kE, 1 / kE)), {0.1});
    for (const auto& r : check_condition_aaa(fam, fam.eps_ladder(), xs)) EXPECT_EQ(r.residual, 0.0);
  }
  {
    FamilyParts p = trivial_parts();
    p.g_eps = kOne;
    p.limit_g = kOne;
    const CoefficientFamily fam(p, {0.1});
    for (const auto& r : check_condition_aaa(fam, fam.eps_ladder(), xs)) {
      EXPECT_NEAR(r.lhs, r.x, 1e-14);
      EXPECT_NEAR(r.residual, 0.0, 1e-14);
    }
  }
  {
    FamilyParts p = trivial_parts();
    p.g_eps = kOne;
    p.limit_g = kOne;
    p.limit_f = curved_map();
    const CoefficientFamily fam(p, {0.1});
    for (const auto& r : check_condition_aaa(fam, fam.eps_ladder(), xs)) {
      const double extra = r.x > 0 ? 0.5 * std::log1p(2 * r.x) : 0.0;
      EXPECT_NEAR(r.rhs, r.x + extra, 1e-10);
      EXPECT_NEAR(r.residual, extra, 1e-10);
    }
  }
}

TEST(JudgeLadder, ToleranceAndMonotonicity) {
  std::vector<ResidualRow> rows{{0.2, 1.0, 0, 0, 0.2}, {0.1, 1.0, 0, 0, 0.1}, {0.05, 1.0, 0, 0, 0.005}};
  EXPECT_TRUE(judge_ladder(rows, 1e-2, 0.0).pass);
  EXPECT_FALSE(judge_ladder(rows, 1e-3, 0.0).pass);
  rows[1].residual = 0.3;
  const auto v = judge_ladder(rows, 1e-2, 1e-8);
  EXPECT_FALSE(v.pass);
  EXPECT_NE(v.detail.find("grows"), std::string::npos);
  rows[1].residual = 0.2 + 1e-9;
  EXPECT_TRUE(judge_ladder(rows, 1e-2, 1e-8).pass);
}

TEST(CheckConditions, CanonicalLadder) {
  const CoefficientFamily fam(indicator_parts(PiecewiseC2::linear(kE, 1 / kE)),
                              {0.2, 0.1, 0.05, 0.02});
  const std::vector<double> xs{-1.0, -0.5, 0.5, 1.0};
  const auto rep = check_conditions(fam, std::nullopt, xs);
  EXPECT_NEAR(rep.alpha, std::tanh(1.0), 1e-15);
  EXPECT_LE(rep.alpha_residual, 1e-12);
  EXPECT_TRUE(rep.a_verdict.pass);
  EXPECT_TRUE(rep.aaa_verdict.pass);
  // On x >= eps the aa) residual is exactly eps.
  for (const auto& r : rep.aa)
    if (r.x > 0) EXPECT_NEAR(r.residual, r.eps, 1e-10);
  const auto wrong = check_conditions(fam, 0.0, xs);
  EXPECT_FALSE(wrong.a_verdict.pass);
  EXPECT_NEAR(wrong.alpha_residual, std::tanh(1.0), 1e-15);
}

TEST(KsDistance, Examples) {
  const auto a = normals(1, 1000);
  EXPECT_EQ(ks_distance(a, a), 0.0);
  EXPECT_EQ(ks_distance(std::vector<double>{0.0}, std::vector<double>{1.0}), 1.0);
  const auto x = normals(2, 100000);
  const auto y = normals(3, 100000);
  EXPECT_LE(ks_distance(x, y), 0.01);
  EXPECT_THROW(ks_distance(std::vector<double>{}, a), ValidationError);
}

TEST(KsDistance, TiesAndPseudometric) {
  const std::vector<double> a{0, 0, 1, 1};
  const std::vector<double> b{0, 1, 1, 1};
  EXPECT_DOUBLE_EQ(ks_distance(a, b), 0.25);
  const auto x = normals(4, 500);
  const auto y = normals(5, 700, 0.2);
  const auto z = normals(6, 300, -0.1);
  EXPECT_EQ(ks_distance(x, y), ks_distance(y, x));
  EXPECT_LE(ks_distance(x, z), ks_distance(x, y) + ks_distance(y, z) + 1e-15);
  const double d = ks_distance(x, y);
  EXPECT_GE(d, 0.0);
  EXPECT_LE(d, 1.0);
}

TEST(Wasserstein1, Examples) {
  const auto a = normals(7, 1000);
  EXPECT_EQ(wasserstein1(a, a), 0.0);
  EXPECT_EQ(wasserstein1(std::vector<double>{0, 0}, std::vector<double>{1, 1}), 1.0);
  std::vector<double> b = a;
  for (auto& v : b) v += 0.3;
  EXPECT_NEAR(wasserstein1(a, b), 0.3, 1e-12);
}

TEST(Wasserstein1, UnequalSizesAndPseudometric) {
  const std::vector<double> a{0.0, 1.0};
  const std::vector<double> b{0.0, 0.0, 1.0, 1.0};
  EXPECT_NEAR(wasserstein1(a, b), 0.0, 1e-15);
  const std::vector<double> c{0.0, 1.0, 2.0};
  // |F_a - F_c| is 1/6 on [0, 1) and 1/3 on [1, 2).
  EXPECT_NEAR(wasserstein1(a, c), 1.0 / 6 + 1.0 / 3, 1e-15);
  const auto x = normals(8, 400);
  const auto y = normals(9, 250, 0.5);
  const auto z = normals(10, 333, 1.0);
  EXPECT_NEAR(wasserstein1(x, y), wasserstein1(y, x), 1e-12);
  EXPECT_LE(wasserstein1(x, z), wasserstein1(x, y) + wasserstein1(y, z) + 1e-12);
}

TEST(KsCriticalValue, AsymptoticQuantile) {
  const double c = std::sqrt(-0.5 * std::log(0.005));
  EXPECT_NEAR(c, 1.6276, 1e-4);
  EXPECT_NEAR(ks_critical_value(100000, 100000), c * std::sqrt(2e-5), 1e-15);
  EXPECT_THROW(ks_critical_value(0, 10), ValidationError);
}

TEST(Lemma1, IdentityMapHasZeroResidual) {
  const TimeGrid g(1.0, 1000);
  const auto rep = verify_lemma1(PiecewiseC2::identity(), kZero, kOne, 0.0, g, {1, 0, 500},
                                 default_bandwidth(g));
  EXPECT_EQ(rep.mean_residual, 0.0);
  EXPECT_EQ(rep.mean_max_residual, 0.0);
  EXPECT_GT(rep.mean_local_time_x, 0.5);
  EXPECT_TRUE(rep.pass);
}

TEST(Lemma1, NoVisitsToOrigin) {
  const TimeGrid g(0.01, 100);
  const auto rep = verify_lemma1(PiecewiseC2::linear(1.0, 2.0), kZero, kOne, 10.0, g, {1, 0, 200},
                                 default_bandwidth(g));
  EXPECT_EQ(rep.mean_local_time_x, 0.0);
  EXPECT_EQ(rep.mean_local_time_y, 0.0);
  EXPECT_EQ(rep.mean_residual, 0.0);
  EXPECT_TRUE(rep.pass);
}

TEST(Lemma1, LinearBranchesCoarse) {
  const TimeGrid g(1.0, 1000);
  const auto rep = verify_lemma1(PiecewiseC2::linear(1.0, 2.0), kZero, kOne, 0.0, g, {2, 0, 4000},
                                 default_bandwidth(g));
  EXPECT_DOUBLE_EQ(rep.scale, 1.5);
  EXPECT_DOUBLE_EQ(rep.delta_transformed, 1.5 * rep.delta);
  EXPECT_NEAR(rep.mean_local_time_y, 1.5 * rep.mean_local_time_x, 0.1 * rep.mean_local_time_x);
  EXPECT_LT(rep.relative_residual, 0.1);
  for (std::size_t i = 0; i < rep.n_paths; ++i)
    EXPECT_LE(rep.path_residual_mean[i], rep.path_residual_max[i]);
}

TEST(Lemma3, Coefficient) {
  EXPECT_DOUBLE_EQ(lemma3_coefficient(PiecewiseC2::linear(1.0, 2.0), SkewParam(0.0)), 1.0 / 3);
  EXPECT_DOUBLE_EQ(lemma3_coefficient(PiecewiseC2::identity(), SkewParam(0.5)), 0.5);
}

TEST(Lemma3, IdentityReducesToSkewEquation) {
  const TimeGrid g(1.0, 1000);
  const auto rep = verify_lemma3(PiecewiseC2::identity(), SkewParam(0.5), kZero, kOne, 0.0, g,
                                 {3, 0, 10000}, default_bandwidth(g));
  EXPECT_DOUBLE_EQ(rep.local_time_coefficient, 0.5);
  EXPECT_NEAR(rep.mean_terminal, 0.5 * rep.mean_local_time, rep.tolerance + 1e-12);
  EXPECT_TRUE(rep.pass) << rep.balance_residual << " > " << rep.tolerance;
}

TEST(Lemma3, LinearBranchesWithoutSkew) {
  const TimeGrid g(1.0, 1000);
  const auto rep = verify_lemma3(PiecewiseC2::linear(1.0, 2.0), SkewParam(0.0), kZero, kOne, 0.0, g,
                                 {4, 0, 10000}, default_bandwidth(g));
  EXPECT_DOUBLE_EQ(rep.local_time_coefficient, 1.0 / 3);
  EXPECT_TRUE(rep.pass) << rep.balance_residual << " > " << rep.tolerance;
}

TEST(Lemma3, CurvedMapWithDrift) {
  const TimeGrid g(1.0, 1000);
  const auto drift = ScalarCoefficient::of_x([](double x) { return -0.5 * std::tanh(x); }, "g");
  const auto rep = verify_lemma3(curved_map(), SkewParam(-0.3), drift, kOne, 0.2, g, {5, 0, 10000},
                                 default_bandwidth(g));
  EXPECT_TRUE(rep.pass) << rep.balance_residual << " > " << rep.tolerance;
}

TEST(StudySteps, HonoursLayerRule) {
  StudyOptions o;
  o.horizon = 1.0;
  o.n_steps = 100;
  EXPECT_EQ(study_steps(o, 0.2), 250u);
  EXPECT_EQ(study_steps(o, 0.02), 25000u);
  o.n_steps = 100000;
  EXPECT_EQ(study_steps(o, 0.2), 100000u);
  o.n_steps = 10;
  o.multi_time = true;
  EXPECT_EQ(study_steps(o, 1.0) % 4, 0u);
  for (double eps : {0.3, 0.07, 0.011}) {
    o.multi_time = false;
    EXPECT_LE(o.horizon / study_steps(o, eps), max_layer_step(eps) * (1 + 1e-12));
  }
}

TEST(ConvergenceStudy, EpsIndependentFamily) {
  const CoefficientFamily fam(trivial_parts(), {0.4, 0.2});
  StudyOptions o;
  o.n_steps = 50;
  o.n_paths = 2000;
  o.master_seed = 5;
  o.multi_time = true;
  const auto res = convergence_study(fam, std::nullopt, o);
  EXPECT_EQ(res.limit_alpha, 0.0);
  for (const auto& r : res.conditions.aa) EXPECT_EQ(r.residual, 0.0);
  ASSERT_EQ(res.distances.rows.size(), 6u);
  for (const auto& r : res.distances.rows) EXPECT_LE(r.ks, 3 * r.ks_half_width);
  EXPECT_EQ(res.distances.terminal().size(), 2u);
  EXPECT_EQ(res.distances.limit_n_steps, study_steps(o, 0.2));
  EXPECT_TRUE(res.pass()) << res.distances.verdict.detail;
}

TEST(ConvergenceStudy, WrongLimitFails) {
  const CoefficientFamily fam(indicator_parts(PiecewiseC2::linear(kE, 1 / kE)), {0.2, 0.1});
  StudyOptions o;
  o.n_steps = 100;
  o.n_paths = 3000;
  o.master_seed = 6;
  const auto res = convergence_study(fam, 0.0, o);
  EXPECT_FALSE(res.pass());
  EXPECT_FALSE(res.distances.verdict.pass);
  EXPECT_GT(res.distances.terminal().back().ks, 0.25);
}

TEST(ConvergenceStudy, DeterministicAcrossRuns) {
  const CoefficientFamily fam(indicator_parts(PiecewiseC2::linear(kE, 1 / kE)), {0.2});
  StudyOptions o;
  o.n_steps = 100;
  o.n_paths = 500;
  o.master_seed = 99;
  const auto a = convergence_study(fam, std::nullopt, o);
  const auto b = convergence_study(fam, std::nullopt, o);
  ASSERT_EQ(a.distances.rows.size(), b.distances.rows.size());
  for (std::size_t i = 0; i < a.distances.rows.size(); ++i) {
    EXPECT_EQ(a.distances.rows[i].ks, b.distances.rows[i].ks);
    EXPECT_EQ(a.distances.rows[i].w1, b.distances.rows[i].w1);
  }
}
