#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "skewlab/coefficients.hpp"
#include "skewlab/piecewise.hpp"
#include "skewlab/simulate.hpp"
#include "skewlab/transforms.hpp"

namespace skewlab {

// ---------------------------------------------------------------------------
// Limit conditions

/// |alpha - (f1 - f2) / (f1 + f2)| with f1, f2 the slopes of f at 0.
double check_condition_a(const PiecewiseC2& f, double alpha);

struct ResidualRow {
  double eps = 0.0;
  double x = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
};

/// Residuals of int_0^x dy / (F_eps sigma_eps^2) against
/// int_0^x dy / (sigma^2 Df) for every (eps, x), eps-major.
std::vector<ResidualRow> check_condition_aa(const CoefficientFamily& fam,
                                            std::span<const double> eps_ladder,
                                            std::span<const double> x_grid);

/// Residuals of int_0^x g_eps / sigma_eps^2 against
/// int_0^x [g / sigma^2 + A_f / (2 Df)] for every (eps, x), eps-major.
std::vector<ResidualRow> check_condition_aaa(const CoefficientFamily& fam,
                                             std::span<const double> eps_ladder,
                                             std::span<const double> x_grid);

struct Verdict {
  bool pass = false;
  double tolerance = 0.0;
  std::string detail;
};

/// Pass iff every residual at the smallest eps is below `tolerance` and, at
/// each x, residuals do not grow by more than `slack` from one eps to the
/// next smaller one.
Verdict judge_ladder(std::span<const ResidualRow> rows, double tolerance, double slack);

struct ConditionTolerances {
  double alpha = 1e-12;
  double integral = 1e-2;
  double ladder_slack = 1e-8;
};

struct ConditionReport {
  double alpha = 0.0;
  double f1 = 0.0;
  double f2 = 0.0;
  double alpha_residual = 0.0;
  std::vector<double> eps_ladder;
  std::vector<ResidualRow> aa;
  std::vector<ResidualRow> aaa;
  Verdict a_verdict;
  Verdict aa_verdict;
  Verdict aaa_verdict;

  bool pass() const { return a_verdict.pass && aa_verdict.pass && aaa_verdict.pass; }
};

/// Runs the three checks over the family's eps ladder. With no alpha given,
/// the limit alpha is derived from the slopes of the family's limit f.
ConditionReport check_conditions(const CoefficientFamily& fam, std::optional<double> alpha,
                                 std::span<const double> x_grid,
                                 const ConditionTolerances& tol = {});

// ---------------------------------------------------------------------------
// Sample distances

/// Sup distance between the two empirical CDFs.
double ks_distance(std::span<const double> a, std::span<const double> b);

/// One-dimensional Wasserstein-1 distance between the empirical measures.
/// Equal sizes give the mean absolute difference of sorted samples; unequal
/// sizes integrate |F_a - F_b| exactly.
double wasserstein1(std::span<const double> a, std::span<const double> b);

/// Asymptotic two-sample KS quantile c(level) sqrt((n + m) / (n m)).
double ks_critical_value(std::size_t n, std::size_t m, double level = 0.99);

// ---------------------------------------------------------------------------
// Lemma checks

/// Identifies a stream of per-path noise without materializing it.
struct NoiseSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t stream = 0;
  std::size_t n_paths = 1;
};

struct LemmaResidualReport {
  int lemma = 0;
  std::size_t n_paths = 0;
  std::size_t n_steps = 0;
  double horizon = 0.0;
  double delta = 0.0;
  double delta_transformed = 0.0;
  double tolerance = 0.0;
  bool pass = false;

  // verify_lemma1: per-path max and mean over grid times of
  // |L_Y(t) - (u1 + u2)/2 L_X(t)|.
  double scale = 0.0;
  double mean_local_time_x = 0.0;
  double mean_local_time_y = 0.0;
  std::vector<double> path_residual_max;
  std::vector<double> path_residual_mean;
  double mean_residual = 0.0;           // mean over paths of path_residual_mean
  double mean_max_residual = 0.0;       // mean over paths of path_residual_max
  double mean_terminal_residual = 0.0;  // mean over paths of |residual(T)|
  double relative_residual = 0.0;       // mean_residual / mean_local_time_x

  // verify_lemma3: expectation balance at T.
  double local_time_coefficient = 0.0;
  double mean_terminal = 0.0;
  double mean_local_time = 0.0;
  double mean_drift_integral = 0.0;
  double balance_residual = 0.0;
  double balance_std_error = 0.0;
};

struct Lemma1Tolerances {
  double relative = 0.05;
};

/// Simulates X, forms Y = u(X) on the same noise and compares the local
/// time of Y (window delta * (u1 + u2)/2, weighted by sigma*^2) with
/// (u1 + u2)/2 times the local time of X.
LemmaResidualReport verify_lemma1(const PiecewiseC2& u, const ScalarCoefficient& drift,
                                  const ScalarCoefficient& diffusion, double x0,
                                  const TimeGrid& grid, const NoiseSpec& noise, double delta,
                                  const Lemma1Tolerances& tol = {});

struct Lemma3Tolerances {
  double std_errors = 3.0;
  /// Allowed relative bias of the local-time estimator.
  double estimator_bias = 0.02;
};

/// Local-time coefficient of u(xi):
/// (u2 - u1 + beta (u2 + u1)) / (u2 + u1 + beta (u2 - u1)).
double lemma3_coefficient(const PiecewiseC2& u, SkewParam beta);

/// Simulates xi with skew beta, forms eta = u(xi) and checks
///   E eta(T) = u(x0) + c E L_eta(T) + E int_0^T g*(eta) ds
/// within std_errors MC standard errors plus estimator_bias * |c| E L_eta.
LemmaResidualReport verify_lemma3(const PiecewiseC2& u, SkewParam beta,
                                  const ScalarCoefficient& g, const ScalarCoefficient& sigma,
                                  double x0, const TimeGrid& grid, const NoiseSpec& noise,
                                  double delta, const Lemma3Tolerances& tol = {});

// ---------------------------------------------------------------------------
// Convergence study

struct WeakDistanceRow {
  double eps = 0.0;
  double time = 0.0;
  std::size_t n_steps = 0;
  double ks = 0.0;
  double w1 = 0.0;
  std::size_t n_paths = 0;
  std::size_t n_limit = 0;
  /// 99% two-sample KS quantile at these sample sizes.
  double ks_half_width = 0.0;
};

struct WeakDistanceReport {
  std::vector<WeakDistanceRow> rows;
  /// Step count of the limit simulation.
  std::size_t limit_n_steps = 0;
  /// Terminal-time rows only, in ladder order.
  std::vector<WeakDistanceRow> terminal() const;
  Verdict verdict;
};

struct StudyOptions {
  double x0 = 0.0;
  double horizon = 1.0;
  /// Base step count; the eps runs refine it to honour dt <= eps^2/10.
  std::size_t n_steps = 10000;
  std::size_t n_paths = 100000;
  std::uint64_t master_seed = 0;
  std::vector<double> x_grid{-1.0, -0.5, 0.5, 1.0};
  /// Also compare marginals at T/4 and T/2.
  bool multi_time = false;
  ConditionTolerances condition_tolerances{};
  /// KS at the smallest eps must be below ks_threshold_factor * q99.
  double ks_threshold_factor = 3.0;
  /// Consecutive KS values may grow by at most ks_slack_factor * q99.
  double ks_slack_factor = 1.0;
};

struct StudyResult {
  ConditionReport conditions;
  WeakDistanceReport distances;
  double limit_alpha = 0.0;
  bool pass() const { return conditions.pass() && distances.verdict.pass; }
};

/// Step count used for an eps run: the base count, refined so that
/// dt <= eps^2/10 (and rounded to a multiple of 4 in multi-time mode).
std::size_t study_steps(const StudyOptions& opts, double eps);

/// Streams `n_paths` paths of the skew process with coefficient alpha and
/// returns the states at the requested grid indices (index-major).
std::vector<std::vector<double>> sample_skew_marginals(SkewParam alpha, const ScalarCoefficient& g,
                                                       const ScalarCoefficient& sigma, double x0,
                                                       const TimeGrid& grid,
                                                       const NoiseSpec& noise,
                                                       std::span<const std::size_t> indices);

/// Streams the eps-family and returns the states at the requested indices.
std::vector<std::vector<double>> sample_eps_marginals(const CoefficientFamily& fam, double eps,
                                                      double x0, const TimeGrid& grid,
                                                      const NoiseSpec& noise,
                                                      std::span<const std::size_t> indices);

/// Checks the limit conditions, then simulates v_eps along the ladder and
/// the skew limit with alpha (derived from f when not given) and compares
/// the marginals.
StudyResult convergence_study(const CoefficientFamily& fam, std::optional<double> alpha,
                              const StudyOptions& opts);

}  // namespace skewlab
