#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <boost/random/normal_distribution.hpp>

#include "skewlab/coefficients.hpp"
#include "skewlab/errors.hpp"
#include "skewlab/transforms.hpp"

namespace skewlab {

/// Uniform grid t_k = T k / n on [0, T].
class TimeGrid {
 public:
  TimeGrid(double horizon, std::size_t n_steps);

  double horizon() const noexcept { return horizon_; }
  std::size_t n_steps() const noexcept { return n_steps_; }
  double dt() const noexcept { return dt_; }
  double time(std::size_t k) const noexcept;

 private:
  double horizon_;
  std::size_t n_steps_;
  double dt_;
};

/// Gaussian increments N(0, dt) for one path.
///
/// Each path owns an independent Mersenne Twister seeded from
/// (master_seed, stream, path_index), so any path can be regenerated alone
/// and results never depend on how paths are scheduled.
class PathNoise {
 public:
  PathNoise(std::uint64_t master_seed, std::uint64_t stream, std::uint64_t path_index, double dt);

  double next() { return sqrt_dt_ * normal_(engine_); }

 private:
  std::mt19937_64 engine_;
  boost::random::normal_distribution<double> normal_;
  double sqrt_dt_;
};

/// Materialized increments for paths [first_path, first_path + n_paths).
class NoiseBlock {
 public:
  NoiseBlock(std::uint64_t master_seed, std::uint64_t stream, std::size_t first_path,
             std::size_t n_paths, TimeGrid grid);

  std::uint64_t master_seed() const noexcept { return master_seed_; }
  std::uint64_t stream() const noexcept { return stream_; }
  std::size_t first_path() const noexcept { return first_path_; }
  std::size_t n_paths() const noexcept { return n_paths_; }
  const TimeGrid& grid() const noexcept { return grid_; }

  /// Increments driving path i (0-based within the block).
  std::span<const double> path(std::size_t i) const;

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_;
  std::size_t first_path_;
  std::size_t n_paths_;
  TimeGrid grid_;
  std::vector<double> increments_;
};

NoiseBlock gen_noise(std::uint64_t master_seed, const TimeGrid& grid, std::size_t n_paths,
                     std::uint64_t stream = 0, std::size_t first_path = 0);

/// States of several paths on a common grid, with the noise that drove them.
class PathEnsemble {
 public:
  PathEnsemble(TimeGrid grid, std::size_t n_paths, std::shared_ptr<const NoiseBlock> noise,
               std::string label);

  const TimeGrid& grid() const noexcept { return grid_; }
  std::size_t n_paths() const noexcept { return n_paths_; }
  std::size_t n_points() const noexcept { return grid_.n_steps() + 1; }
  const std::string& label() const noexcept { return label_; }
  const std::shared_ptr<const NoiseBlock>& noise() const noexcept { return noise_; }

  std::span<const double> path(std::size_t i) const;
  std::span<double> path(std::size_t i);
  /// State of every path at grid index k.
  std::vector<double> slice(std::size_t k) const;
  std::vector<double> terminal() const { return slice(grid_.n_steps()); }

 private:
  TimeGrid grid_;
  std::size_t n_paths_;
  std::shared_ptr<const NoiseBlock> noise_;
  std::string label_;
  std::vector<double> values_;
};

/// Per-path local time at zero, reported at every grid time.
struct LocalTimeEstimate {
  TimeGrid grid;
  double delta = 0.0;
  /// values[i][k] = L_i(t_k, 0); values[i][0] = 0.
  std::vector<std::vector<double>> values;

  std::vector<double> terminal() const;
};

/// Default local-time window 2 sqrt(dt).
double default_bandwidth(const TimeGrid& grid);

/// Throws BandwidthTooSmall unless delta >= sqrt(dt) * max_sigma.
void check_bandwidth(double delta, double dt, double max_sigma);

/// Runs fn(i) for i in [0, n). Each index is handled exactly once and
/// results must be written to preassigned slots; output is independent of
/// the thread count. threads = 0 uses the hardware concurrency.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  unsigned threads = 0);

/// Explicit Euler-Maruyama: x_{k+1} = x_k + drift(x_k) dt + diffusion(x_k) dw_k.
/// Coefficients are evaluated with eps = 0; bind eps beforehand if needed.
/// Throws NonFiniteState on overflow or NaN.
PathEnsemble euler_maruyama(const ScalarCoefficient& drift, const ScalarCoefficient& diffusion,
                            double x0, const TimeGrid& grid,
                            std::shared_ptr<const NoiseBlock> noise);

/// Weak solution of the skew equation with local-time coefficient beta:
/// zeta is integrated with the tilde coefficients from phi(x0) and mapped
/// back through kappa.
PathEnsemble simulate_skew_sde(SkewParam beta, const ScalarCoefficient& g,
                               const ScalarCoefficient& sigma, double x0, const TimeGrid& grid,
                               std::shared_ptr<const NoiseBlock> noise);

/// Occupation-time estimator
///   L(t_k) = 1/(2 delta) sum_{j < k, |x_j| < delta} sigma(x_j)^2 dt.
/// Throws BandwidthTooSmall if delta < sqrt(dt) * max sigma over the
/// states that fall inside the window.
LocalTimeEstimate estimate_local_time(const PathEnsemble& paths, const ScalarCoefficient& sigma,
                                      double delta);

/// Largest admissible step for an eps-scale drift layer: eps^2 * safety.
double max_layer_step(double eps, double safety = 0.1);

/// Euler-Maruyama for drift b_eps + g_eps and diffusion sigma_eps at eps.
/// Throws StepTooCoarse if dt > max_layer_step(eps).
PathEnsemble simulate_eps_family(const CoefficientFamily& fam, double eps, double x0,
                                 const TimeGrid& grid, std::shared_ptr<const NoiseBlock> noise);

/// Applies map to every state; the noise reference is kept.
PathEnsemble transform_ensemble(const PathEnsemble& paths,
                                const std::function<double(double)>& map, std::string label);

// ---------------------------------------------------------------------------
// Streaming kernels. These produce bit-identical states to the materialized
// API above but keep only what the caller records, for ensembles too large
// to hold in memory.

[[noreturn]] void throw_non_finite(std::size_t path, std::size_t step, double previous);

inline double euler_step(const ScalarCoefficient& drift, const ScalarCoefficient& diffusion,
                         double x, double dt, double dw) {
  return x + drift(x) * dt + diffusion(x) * dw;
}

/// Simulates one path driven by `noise` and calls observe(k, x_k) for
/// k = 0..n_steps. Same step as euler_maruyama.
template <class Observer>
void run_euler_path(const ScalarCoefficient& drift, const ScalarCoefficient& diffusion,
                    double x0, const TimeGrid& grid, PathNoise& noise, std::size_t path_index,
                    Observer&& observe) {
  double x = x0;
  observe(std::size_t{0}, x);
  const double dt = grid.dt();
  for (std::size_t k = 0; k < grid.n_steps(); ++k) {
    const double next = euler_step(drift, diffusion, x, dt, noise.next());
    if (!std::isfinite(next)) throw_non_finite(path_index, k + 1, x);
    x = next;
    observe(k + 1, x);
  }
}

/// Accumulates the occupation-time estimator along one path.
class LocalTimeAccumulator {
 public:
  LocalTimeAccumulator(double delta, double dt) : delta_(delta), dt_(dt) {}

  /// Adds state x; sigma is only evaluated inside the window.
  template <class Sigma>
  void add(double x, const Sigma& sigma) {
    if (std::abs(x) < delta_) {
      const double s = std::abs(sigma(x));
      max_sigma_ = std::max(max_sigma_, s);
      sum_ += s * s * dt_;
    }
  }
  double value() const { return sum_ / (2.0 * delta_); }
  /// Largest |sigma| seen inside the window so far.
  double max_sigma() const { return max_sigma_; }

 private:
  double delta_;
  double dt_;
  double sum_ = 0.0;
  double max_sigma_ = 0.0;
};

}  // namespace skewlab
