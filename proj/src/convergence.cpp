#include "skewlab/convergence.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "skewlab/errors.hpp"
#include "skewlab/quadrature.hpp"

namespace skewlab {

namespace {

std::string num(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

std::vector<double> with_origin(std::vector<double> pts) {
  pts.push_back(0.0);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

std::vector<double> limit_breakpoints(const CoefficientFamily& fam) {
  auto pts = fam.limit_g().breakpoints();
  auto more = fam.limit_sigma().breakpoints();
  pts.insert(pts.end(), more.begin(), more.end());
  return with_origin(std::move(pts));
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

double check_condition_a(const PiecewiseC2& f, double alpha) {
  return std::abs(alpha - alpha_limit(f.left_slope(), f.right_slope()));
}

std::vector<ResidualRow> check_condition_aa(const CoefficientFamily& fam,
                                            std::span<const double> eps_ladder,
                                            std::span<const double> x_grid) {
  const auto& f = fam.limit_f();
  const auto& sigma = fam.limit_sigma();
  const auto limit_bps = limit_breakpoints(fam);
  auto rhs_integrand = [&](double y) {
    const double s = sigma(y);
    return 1.0 / (s * s * sym_deriv(f, y));
  };

  std::vector<ResidualRow> rows;
  for (double eps : eps_ladder) {
    auto scale = fam.scale(eps);
    const auto bps = fam.breakpoints(eps);
    auto lhs_integrand = [&](double y) {
      const double s = fam.sigma_eps()(y, eps);
      return 1.0 / (scale->density(y) * s * s);
    };
    for (double x : x_grid) {
      ResidualRow row{eps, x, integral(lhs_integrand, 0.0, x, bps),
                      integral(rhs_integrand, 0.0, x, limit_bps), 0.0};
      row.residual = std::abs(row.lhs - row.rhs);
      rows.push_back(row);
    }
  }
  return rows;
}

std::vector<ResidualRow> check_condition_aaa(const CoefficientFamily& fam,
                                             std::span<const double> eps_ladder,
                                             std::span<const double> x_grid) {
  const auto& f = fam.limit_f();
  const auto& g = fam.limit_g();
  const auto& sigma = fam.limit_sigma();
  const auto limit_bps = limit_breakpoints(fam);
  auto rhs_integrand = [&](double y) {
    const double s = sigma(y);
    return g(y) / (s * s) + 0.5 * curvature_density(f, y) / sym_deriv(f, y);
  };
  std::vector<double> rhs;
  rhs.reserve(x_grid.size());
  for (double x : x_grid) rhs.push_back(integral(rhs_integrand, 0.0, x, limit_bps));

  std::vector<ResidualRow> rows;
  for (double eps : eps_ladder) {
    const auto bps = fam.breakpoints(eps);
    auto lhs_integrand = [&](double y) {
      const double s = fam.sigma_eps()(y, eps);
      return fam.g_eps()(y, eps) / (s * s);
    };
    for (std::size_t j = 0; j < x_grid.size(); ++j) {
      ResidualRow row{eps, x_grid[j], integral(lhs_integrand, 0.0, x_grid[j], bps), rhs[j], 0.0};
      row.residual = std::abs(row.lhs - row.rhs);
      rows.push_back(row);
    }
  }
  return rows;
}

Verdict judge_ladder(std::span<const ResidualRow> rows, double tolerance, double slack) {
  Verdict v{true, tolerance, {}};
  if (rows.empty()) {
    v.detail = "no residuals";
    return v;
  }
  // Ladder order is the order of first appearance.
  std::vector<double> ladder;
  for (const auto& r : rows) {
    if (std::find(ladder.begin(), ladder.end(), r.eps) == ladder.end()) ladder.push_back(r.eps);
  }
  const double smallest = *std::min_element(ladder.begin(), ladder.end());
  std::ostringstream detail;

  double worst = 0.0;
  double worst_x = 0.0;
  for (const auto& r : rows) {
    if (r.eps == smallest && r.residual > worst) {
      worst = r.residual;
      worst_x = r.x;
    }
  }
  if (!(worst <= tolerance)) {
    v.pass = false;
    detail << "residual " << num(worst) << " at eps = " << num(smallest) << ", x = " << num(worst_x)
           << " exceeds tolerance " << num(tolerance) << "; ";
  }

  std::map<double, std::vector<ResidualRow>> by_x;
  for (const auto& r : rows) by_x[r.x].push_back(r);
  for (auto& [x, series] : by_x) {
    std::sort(series.begin(), series.end(),
              [](const ResidualRow& a, const ResidualRow& b) { return a.eps > b.eps; });
    for (std::size_t i = 1; i < series.size(); ++i) {
      if (series[i].residual > series[i - 1].residual + slack) {
        v.pass = false;
        detail << "residual at x = " << num(x) << " grows from " << num(series[i - 1].residual)
               << " (eps = " << num(series[i - 1].eps) << ") to " << num(series[i].residual)
               << " (eps = " << num(series[i].eps) << "); ";
      }
    }
  }
  v.detail = v.pass ? "max residual " + num(worst) + " at eps = " + num(smallest) : detail.str();
  return v;
}

ConditionReport check_conditions(const CoefficientFamily& fam, std::optional<double> alpha,
                                 std::span<const double> x_grid, const ConditionTolerances& tol) {
  ConditionReport rep;
  const auto& f = fam.limit_f();
  rep.f1 = f.left_slope();
  rep.f2 = f.right_slope();
  rep.alpha = alpha.value_or(alpha_limit(rep.f1, rep.f2));
  rep.alpha_residual = check_condition_a(f, rep.alpha);
  rep.a_verdict = {rep.alpha_residual <= tol.alpha, tol.alpha,
                   "alpha residual " + num(rep.alpha_residual)};
  rep.eps_ladder = fam.eps_ladder();
  rep.aa = check_condition_aa(fam, rep.eps_ladder, x_grid);
  rep.aaa = check_condition_aaa(fam, rep.eps_ladder, x_grid);
  rep.aa_verdict = judge_ladder(rep.aa, tol.integral, tol.ladder_slack);
  rep.aaa_verdict = judge_ladder(rep.aaa, tol.integral, tol.ladder_slack);
  return rep;
}

// ---------------------------------------------------------------------------

double ks_distance(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ValidationError("ks_distance needs two nonempty samples");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double n = static_cast<double>(x.size());
  const double m = static_cast<double>(y.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  return d;
}

double wasserstein1(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw ValidationError("wasserstein1 needs two nonempty samples");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  if (x.size() == y.size()) {
    double s = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) s += std::abs(x[k] - y[k]);
    return s / static_cast<double>(x.size());
  }
  const double n = static_cast<double>(x.size());
  const double m = static_cast<double>(y.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double prev = std::min(x.front(), y.front());
  double total = 0.0;
  while (i < x.size() || j < y.size()) {
    const double v = j >= y.size() || (i < x.size() && x[i] <= y[j]) ? x[i] : y[j];
    total += std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m) * (v - prev);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    prev = v;
  }
  return total;
}

double ks_critical_value(std::size_t n, std::size_t m, double level) {
  if (n == 0 || m == 0 || !(level > 0.0 && level < 1.0)) {
    throw ValidationError("ks_critical_value needs positive sizes and a level in (0, 1)");
  }
  const double c = std::sqrt(-0.5 * std::log((1.0 - level) / 2.0));
  const double dn = static_cast<double>(n);
  const double dm = static_cast<double>(m);
  return c * std::sqrt((dn + dm) / (dn * dm));
}

// ---------------------------------------------------------------------------

LemmaResidualReport verify_lemma1(const PiecewiseC2& u, const ScalarCoefficient& drift,
                                  const ScalarCoefficient& diffusion, double x0,
                                  const TimeGrid& grid, const NoiseSpec& noise, double delta,
                                  const Lemma1Tolerances& tol) {
  const double scale = 0.5 * (u.left_slope() + u.right_slope());
  const double delta_y = delta * scale;
  const auto [g_star, sigma_star] = star_coeffs(u, drift, diffusion);
  (void)g_star;

  LemmaResidualReport rep;
  rep.lemma = 1;
  rep.n_paths = noise.n_paths;
  rep.n_steps = grid.n_steps();
  rep.horizon = grid.horizon();
  rep.delta = delta;
  rep.delta_transformed = delta_y;
  rep.scale = scale;
  rep.tolerance = tol.relative;
  rep.path_residual_max.resize(noise.n_paths);
  rep.path_residual_mean.resize(noise.n_paths);
  std::vector<double> lx(noise.n_paths);
  std::vector<double> ly(noise.n_paths);
  std::vector<double> terminal(noise.n_paths);
  std::vector<double> max_sx(noise.n_paths);
  std::vector<double> max_sy(noise.n_paths);

  parallel_for(noise.n_paths, [&](std::size_t i) {
    PathNoise dw(noise.master_seed, noise.stream, i, grid.dt());
    LocalTimeAccumulator acc_x(delta, grid.dt());
    LocalTimeAccumulator acc_y(delta_y, grid.dt());
    double res_max = 0.0;
    double res_sum = 0.0;  // the k = 0 residual is zero
    double res = 0.0;
    run_euler_path(drift, diffusion, x0, grid, dw, i, [&](std::size_t k, double x) {
      if (k > 0) {
        res = std::abs(acc_y.value() - scale * acc_x.value());
        res_max = std::max(res_max, res);
        res_sum += res;
      }
      if (k < grid.n_steps()) {
        acc_x.add(x, diffusion);
        acc_y.add(u(x), sigma_star);
      }
    });
    rep.path_residual_max[i] = res_max;
    rep.path_residual_mean[i] = res_sum / static_cast<double>(grid.n_steps() + 1);
    lx[i] = acc_x.value();
    ly[i] = acc_y.value();
    terminal[i] = res;
    max_sx[i] = acc_x.max_sigma();
    max_sy[i] = acc_y.max_sigma();
  });
  check_bandwidth(delta, grid.dt(), *std::max_element(max_sx.begin(), max_sx.end()));
  check_bandwidth(delta_y, grid.dt(), *std::max_element(max_sy.begin(), max_sy.end()));

  rep.mean_local_time_x = mean(lx);
  rep.mean_local_time_y = mean(ly);
  rep.mean_residual = mean(rep.path_residual_mean);
  rep.mean_max_residual = mean(rep.path_residual_max);
  rep.mean_terminal_residual = mean(terminal);
  if (rep.mean_local_time_x > 0.0) {
    rep.relative_residual = rep.mean_residual / rep.mean_local_time_x;
    rep.pass = rep.relative_residual <= tol.relative;
  } else {
    // No visits to the origin: both estimates vanish identically.
    rep.relative_residual = 0.0;
    rep.pass = rep.mean_residual == 0.0;
  }
  return rep;
}

double lemma3_coefficient(const PiecewiseC2& u, SkewParam beta) {
  const double u1 = u.left_slope();
  const double u2 = u.right_slope();
  const double b = beta.value();
  return (u2 - u1 + b * (u2 + u1)) / (u2 + u1 + b * (u2 - u1));
}

LemmaResidualReport verify_lemma3(const PiecewiseC2& u, SkewParam beta,
                                  const ScalarCoefficient& g, const ScalarCoefficient& sigma,
                                  double x0, const TimeGrid& grid, const NoiseSpec& noise,
                                  double delta, const Lemma3Tolerances& tol) {
  const double scale = 0.5 * (u.left_slope() + u.right_slope());
  const double delta_eta = delta * scale;
  const double c = lemma3_coefficient(u, beta);
  const auto [g_star, sigma_star] = star_coeffs(u, g, sigma);
  (void)g_star;
  const auto g_tilde = tilde_coeff(g, beta);
  const auto s_tilde = tilde_coeff(sigma, beta);
  const double eta0 = u(x0);
  const double dt = grid.dt();

  std::vector<double> balance(noise.n_paths);
  std::vector<double> eta_t(noise.n_paths);
  std::vector<double> l_eta(noise.n_paths);
  std::vector<double> drift_int(noise.n_paths);
  std::vector<double> max_s(noise.n_paths);

  parallel_for(noise.n_paths, [&](std::size_t i) {
    PathNoise dw(noise.master_seed, noise.stream, i, dt);
    LocalTimeAccumulator acc(delta_eta, dt);
    double drift_sum = 0.0;
    double eta = eta0;
    run_euler_path(g_tilde, s_tilde, phi(beta, x0), grid, dw, i, [&](std::size_t k, double z) {
      const double xi = kappa(beta, z);
      eta = u(xi);
      if (k < grid.n_steps()) {
        acc.add(eta, sigma_star);
        // g*(eta) with eta = u(xi), evaluated without re-inverting u.
        const double s = sigma(xi);
        drift_sum += (sym_deriv(u, xi) * g(xi) + 0.5 * s * s * curvature_density(u, xi)) * dt;
      }
    });
    eta_t[i] = eta;
    l_eta[i] = acc.value();
    drift_int[i] = drift_sum;
    balance[i] = eta - eta0 - c * acc.value() - drift_sum;
    max_s[i] = acc.max_sigma();
  });
  check_bandwidth(delta_eta, dt, *std::max_element(max_s.begin(), max_s.end()));

  LemmaResidualReport rep;
  rep.lemma = 3;
  rep.n_paths = noise.n_paths;
  rep.n_steps = grid.n_steps();
  rep.horizon = grid.horizon();
  rep.delta = delta;
  rep.delta_transformed = delta_eta;
  rep.scale = scale;
  rep.local_time_coefficient = c;
  rep.mean_terminal = mean(eta_t);
  rep.mean_local_time = mean(l_eta);
  rep.mean_drift_integral = mean(drift_int);
  const double m = mean(balance);
  double ss = 0.0;
  for (double v : balance) ss += (v - m) * (v - m);
  const double n = static_cast<double>(balance.size());
  rep.balance_residual = std::abs(m);
  rep.balance_std_error = n > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  rep.tolerance = tol.std_errors * rep.balance_std_error +
                  tol.estimator_bias * std::abs(c) * rep.mean_local_time;
  rep.pass = rep.balance_residual <= rep.tolerance;
  return rep;
}

// ---------------------------------------------------------------------------

std::vector<WeakDistanceRow> WeakDistanceReport::terminal() const {
  double t_max = 0.0;
  for (const auto& r : rows) t_max = std::max(t_max, r.time);
  std::vector<WeakDistanceRow> out;
  for (const auto& r : rows) {
    if (r.time == t_max) out.push_back(r);
  }
  return out;
}

std::size_t study_steps(const StudyOptions& opts, double eps) {
  const double limit = max_layer_step(eps);
  auto needed = static_cast<std::size_t>(std::ceil(opts.horizon / limit));
  // ceil of a rounded quotient can land one step short of the bound.
  while (opts.horizon / static_cast<double>(needed) > limit * (1.0 + 1e-12)) ++needed;
  std::size_t n = std::max(opts.n_steps, needed);
  if (opts.multi_time) n = (n + 3) / 4 * 4;
  return n;
}

namespace {

std::vector<std::size_t> record_indices(std::size_t n_steps, bool multi_time) {
  if (!multi_time) return {n_steps};
  return {n_steps / 4, n_steps / 2, n_steps};
}

}  // namespace

std::vector<std::vector<double>> sample_skew_marginals(SkewParam alpha, const ScalarCoefficient& g,
                                                       const ScalarCoefficient& sigma, double x0,
                                                       const TimeGrid& grid,
                                                       const NoiseSpec& noise,
                                                       std::span<const std::size_t> indices) {
  const auto g_tilde = tilde_coeff(g, alpha);
  const auto s_tilde = tilde_coeff(sigma, alpha);
  std::vector<std::vector<double>> out(indices.size(), std::vector<double>(noise.n_paths));
  parallel_for(noise.n_paths, [&](std::size_t i) {
    PathNoise dw(noise.master_seed, noise.stream, i, grid.dt());
    std::size_t slot = 0;
    run_euler_path(g_tilde, s_tilde, phi(alpha, x0), grid, dw, i, [&](std::size_t k, double z) {
      while (slot < indices.size() && indices[slot] == k) out[slot++][i] = kappa(alpha, z);
    });
  });
  return out;
}

std::vector<std::vector<double>> sample_eps_marginals(const CoefficientFamily& fam, double eps,
                                                      double x0, const TimeGrid& grid,
                                                      const NoiseSpec& noise,
                                                      std::span<const std::size_t> indices) {
  if (grid.dt() > max_layer_step(eps) * (1.0 + 1e-12)) {
    throw StepTooCoarse("time step " + num(grid.dt()) + " exceeds eps^2/10 for eps = " + num(eps));
  }
  const auto drift = fam.b_eps().bind(eps) + fam.g_eps().bind(eps);
  const auto diffusion = fam.sigma_eps().bind(eps);
  std::vector<std::vector<double>> out(indices.size(), std::vector<double>(noise.n_paths));
  parallel_for(noise.n_paths, [&](std::size_t i) {
    PathNoise dw(noise.master_seed, noise.stream, i, grid.dt());
    std::size_t slot = 0;
    run_euler_path(drift, diffusion, x0, grid, dw, i, [&](std::size_t k, double x) {
      while (slot < indices.size() && indices[slot] == k) out[slot++][i] = x;
    });
  });
  return out;
}

StudyResult convergence_study(const CoefficientFamily& fam, std::optional<double> alpha,
                              const StudyOptions& opts) {
  StudyResult result;
  result.conditions = check_conditions(fam, alpha, opts.x_grid, opts.condition_tolerances);
  result.limit_alpha = result.conditions.alpha;
  const SkewParam limit_alpha(result.limit_alpha);

  // Stream 0 drives the limit process, stream k + 1 the k-th eps run. The
  // limit runs on the finest grid of the ladder.
  std::size_t limit_steps = opts.multi_time ? (opts.n_steps + 3) / 4 * 4 : opts.n_steps;
  for (double eps : fam.eps_ladder()) limit_steps = std::max(limit_steps, study_steps(opts, eps));
  const TimeGrid limit_grid(opts.horizon, limit_steps);
  result.distances.limit_n_steps = limit_steps;
  const auto limit_idx = record_indices(limit_grid.n_steps(), opts.multi_time);
  const auto limit = sample_skew_marginals(limit_alpha, fam.limit_g(), fam.limit_sigma(), opts.x0,
                                           limit_grid, {opts.master_seed, 0, opts.n_paths},
                                           limit_idx);

  const auto& ladder = fam.eps_ladder();
  for (std::size_t k = 0; k < ladder.size(); ++k) {
    const double eps = ladder[k];
    const TimeGrid grid(opts.horizon, study_steps(opts, eps));
    const auto idx = record_indices(grid.n_steps(), opts.multi_time);
    const auto samples =
        sample_eps_marginals(fam, eps, opts.x0, grid, {opts.master_seed, k + 1, opts.n_paths}, idx);
    for (std::size_t s = 0; s < idx.size(); ++s) {
      WeakDistanceRow row;
      row.eps = eps;
      row.time = grid.time(idx[s]);
      row.n_steps = grid.n_steps();
      row.ks = ks_distance(samples[s], limit[s]);
      row.w1 = wasserstein1(samples[s], limit[s]);
      row.n_paths = samples[s].size();
      row.n_limit = limit[s].size();
      row.ks_half_width = ks_critical_value(row.n_paths, row.n_limit);
      result.distances.rows.push_back(row);
    }
  }

  auto& verdict = result.distances.verdict;
  const auto term = result.distances.terminal();
  verdict.pass = true;
  std::ostringstream detail;
  if (!term.empty()) {
    const auto& last = term.back();
    verdict.tolerance = opts.ks_threshold_factor * last.ks_half_width;
    if (!(last.ks <= verdict.tolerance)) {
      verdict.pass = false;
      detail << "KS " << num(last.ks) << " at eps = " << num(last.eps) << " exceeds "
             << num(verdict.tolerance) << "; ";
    }
    for (std::size_t i = 1; i < term.size(); ++i) {
      const double slack = opts.ks_slack_factor * term[i].ks_half_width;
      if (term[i].ks > term[i - 1].ks + slack) {
        verdict.pass = false;
        detail << "KS grows from " << num(term[i - 1].ks) << " (eps = " << num(term[i - 1].eps)
               << ") to " << num(term[i].ks) << " (eps = " << num(term[i].eps) << "); ";
      }
    }
    verdict.detail = verdict.pass ? "final KS " + num(last.ks) + " below " + num(verdict.tolerance)
                                  : detail.str();
  }
  return result;
}

}  // namespace skewlab
