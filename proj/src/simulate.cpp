#include "skewlab/simulate.hpp"

#include <atomic>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace skewlab {

namespace {

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::uint32_t lo32(std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); }
std::uint32_t hi32(std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); }

}  // namespace

TimeGrid::TimeGrid(double horizon, std::size_t n_steps)
    : horizon_(horizon), n_steps_(n_steps), dt_(horizon / static_cast<double>(n_steps)) {
  if (!(horizon > 0.0) || !std::isfinite(horizon)) {
    throw ValidationError("time horizon must be positive and finite, got " + num(horizon));
  }
  if (n_steps == 0) throw ValidationError("time grid needs at least one step");
}

double TimeGrid::time(std::size_t k) const noexcept {
  if (k == n_steps_) return horizon_;
  return horizon_ * static_cast<double>(k) / static_cast<double>(n_steps_);
}

PathNoise::PathNoise(std::uint64_t master_seed, std::uint64_t stream, std::uint64_t path_index,
                     double dt)
    : sqrt_dt_(std::sqrt(dt)) {
  std::seed_seq seq{lo32(master_seed), hi32(master_seed), lo32(stream),
                    hi32(stream),      lo32(path_index),  hi32(path_index)};
  engine_.seed(seq);
}

NoiseBlock::NoiseBlock(std::uint64_t master_seed, std::uint64_t stream, std::size_t first_path,
                       std::size_t n_paths, TimeGrid grid)
    : master_seed_(master_seed),
      stream_(stream),
      first_path_(first_path),
      n_paths_(n_paths),
      grid_(grid),
      increments_(n_paths * grid.n_steps()) {
  if (n_paths == 0) throw ValidationError("noise block needs at least one path");
  const std::size_t n = grid_.n_steps();
  parallel_for(n_paths_, [&](std::size_t i) {
    PathNoise noise(master_seed_, stream_, first_path_ + i, grid_.dt());
    double* out = increments_.data() + i * n;
    for (std::size_t k = 0; k < n; ++k) out[k] = noise.next();
  });
}

std::span<const double> NoiseBlock::path(std::size_t i) const {
  const std::size_t n = grid_.n_steps();
  return {increments_.data() + i * n, n};
}

NoiseBlock gen_noise(std::uint64_t master_seed, const TimeGrid& grid, std::size_t n_paths,
                     std::uint64_t stream, std::size_t first_path) {
  return NoiseBlock(master_seed, stream, first_path, n_paths, grid);
}

PathEnsemble::PathEnsemble(TimeGrid grid, std::size_t n_paths,
                           std::shared_ptr<const NoiseBlock> noise, std::string label)
    : grid_(grid),
      n_paths_(n_paths),
      noise_(std::move(noise)),
      label_(std::move(label)),
      values_(n_paths * (grid.n_steps() + 1)) {}

std::span<const double> PathEnsemble::path(std::size_t i) const {
  return {values_.data() + i * n_points(), n_points()};
}

std::span<double> PathEnsemble::path(std::size_t i) {
  return {values_.data() + i * n_points(), n_points()};
}

std::vector<double> PathEnsemble::slice(std::size_t k) const {
  std::vector<double> out(n_paths_);
  for (std::size_t i = 0; i < n_paths_; ++i) out[i] = values_[i * n_points() + k];
  return out;
}

std::vector<double> LocalTimeEstimate::terminal() const {
  std::vector<double> out;
  out.reserve(values.size());
  for (const auto& v : values) out.push_back(v.back());
  return out;
}

double default_bandwidth(const TimeGrid& grid) { return 2.0 * std::sqrt(grid.dt()); }

void check_bandwidth(double delta, double dt, double max_sigma) {
  const double floor = std::sqrt(dt) * max_sigma;
  if (delta < floor) {
    throw BandwidthTooSmall("local-time bandwidth " + num(delta) +
                            " is below the one-step displacement scale sqrt(dt) * max sigma = " +
                            num(floor));
  }
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn, unsigned threads) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  if (threads == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  std::size_t error_index = std::numeric_limits<std::size_t>::max();
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        // Report the failure with the lowest index, as a sequential run would.
        if (i < error_index) {
          error_index = i;
          error = std::current_exception();
        }
      }
    }
  };
  std::vector<std::jthread> pool;
  const auto count = std::min<std::size_t>(threads, n);
  for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
  pool.clear();
  if (error) std::rethrow_exception(error);
}

void throw_non_finite(std::size_t path, std::size_t step, double previous) {
  throw NonFiniteState("state became non-finite on path " + std::to_string(path) + " at step " +
                       std::to_string(step) + " (previous state " + num(previous) + ")");
}

PathEnsemble euler_maruyama(const ScalarCoefficient& drift, const ScalarCoefficient& diffusion,
                            double x0, const TimeGrid& grid,
                            std::shared_ptr<const NoiseBlock> noise) {
  if (!noise) throw ValidationError("euler_maruyama needs a noise block");
  if (noise->grid().n_steps() != grid.n_steps() || noise->grid().dt() != grid.dt()) {
    throw ValidationError("noise block was generated for a different time grid");
  }
  PathEnsemble out(grid, noise->n_paths(), noise, "euler(" + drift.label() + ", " +
                                                      diffusion.label() + ")");
  const double dt = grid.dt();
  parallel_for(noise->n_paths(), [&](std::size_t i) {
    auto dw = noise->path(i);
    auto x = out.path(i);
    x[0] = x0;
    for (std::size_t k = 0; k < grid.n_steps(); ++k) {
      const double next = euler_step(drift, diffusion, x[k], dt, dw[k]);
      if (!std::isfinite(next)) throw_non_finite(noise->first_path() + i, k + 1, x[k]);
      x[k + 1] = next;
    }
  });
  return out;
}

PathEnsemble simulate_skew_sde(SkewParam beta, const ScalarCoefficient& g,
                               const ScalarCoefficient& sigma, double x0, const TimeGrid& grid,
                               std::shared_ptr<const NoiseBlock> noise) {
  auto zeta = euler_maruyama(tilde_coeff(g, beta), tilde_coeff(sigma, beta), phi(beta, x0), grid,
                             std::move(noise));
  return transform_ensemble(
      zeta, [beta](double z) { return kappa(beta, z); }, "skew(" + num(beta.value()) + ")");
}

LocalTimeEstimate estimate_local_time(const PathEnsemble& paths, const ScalarCoefficient& sigma,
                                      double delta) {
  if (!(delta > 0.0)) throw BandwidthTooSmall("local-time bandwidth must be positive");
  const auto& grid = paths.grid();
  LocalTimeEstimate est{grid, delta, std::vector<std::vector<double>>(paths.n_paths())};
  std::vector<double> max_sigma(paths.n_paths(), 0.0);
  parallel_for(paths.n_paths(), [&](std::size_t i) {
    auto x = paths.path(i);
    auto& out = est.values[i];
    out.resize(paths.n_points());
    LocalTimeAccumulator acc(delta, grid.dt());
    out[0] = 0.0;
    for (std::size_t k = 0; k < grid.n_steps(); ++k) {
      acc.add(x[k], sigma);
      out[k + 1] = acc.value();
    }
    max_sigma[i] = acc.max_sigma();
  });
  check_bandwidth(delta, grid.dt(), *std::max_element(max_sigma.begin(), max_sigma.end()));
  return est;
}

double max_layer_step(double eps, double safety) { return eps * eps * safety; }

PathEnsemble simulate_eps_family(const CoefficientFamily& fam, double eps, double x0,
                                 const TimeGrid& grid, std::shared_ptr<const NoiseBlock> noise) {
  if (!(eps > 0.0)) throw ValidationError("eps must be positive, got " + num(eps));
  const double limit = max_layer_step(eps);
  if (grid.dt() > limit * (1.0 + 1e-12)) {
    throw StepTooCoarse("time step " + num(grid.dt()) + " exceeds eps^2/10 = " + num(limit) +
                        " for eps = " + num(eps) + "; use at least " +
                        std::to_string(static_cast<std::size_t>(
                            std::ceil(grid.horizon() / limit))) +
                        " steps");
  }
  auto drift = fam.b_eps().bind(eps) + fam.g_eps().bind(eps);
  auto out = euler_maruyama(drift, fam.sigma_eps().bind(eps), x0, grid, std::move(noise));
  return out;
}

PathEnsemble transform_ensemble(const PathEnsemble& paths,
                                const std::function<double(double)>& map, std::string label) {
  PathEnsemble out(paths.grid(), paths.n_paths(), paths.noise(), std::move(label));
  parallel_for(paths.n_paths(), [&](std::size_t i) {
    auto src = paths.path(i);
    auto dst = out.path(i);
    for (std::size_t k = 0; k < src.size(); ++k) {
      dst[k] = map(src[k]);
      if (!std::isfinite(dst[k])) {
        throw NonFiniteState("transform produced a non-finite state on path " +
                             std::to_string(i) + " at step " + std::to_string(k));
      }
    }
  });
  return out;
}

}  // namespace skewlab
