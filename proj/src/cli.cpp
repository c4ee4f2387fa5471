#include "skewlab/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "skewlab/config.hpp"
#include "skewlab/convergence.hpp"
#include "skewlab/io.hpp"
#include "skewlab/simulate.hpp"

namespace skewlab {

namespace {

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<double> eps;
  int which = 0;
};

struct Context {
  StudyConfig cfg;
  std::string echo;
  std::filesystem::path dir;
};

Context load(const Options& o) {
  Context ctx;
  ctx.cfg = load_config(o.config);
  if (o.seed) ctx.cfg.master_seed = *o.seed;
  ctx.echo = echo_config(ctx.cfg);
  ctx.dir = o.out.empty() ? std::filesystem::path(ctx.cfg.output_dir) : std::filesystem::path(o.out);
  return ctx;
}

std::optional<double> skew_override(const StudyConfig& cfg) {
  if (cfg.alpha) return cfg.alpha;
  return cfg.beta;
}

std::string emit(const Context& ctx, const std::string& name, const std::string& content,
                 std::ostream& out) {
  const std::string path = (ctx.dir / name).string();
  write_file(path, content);
  out << "wrote " << path << "\n";
  return path;
}

/// One simulated run: the eps-family at --eps, or the skew limit otherwise.
struct Run {
  PathEnsemble paths;
  ScalarCoefficient sigma;
};

Run simulate_run(const Context& ctx, const Options& o) {
  const auto& cfg = ctx.cfg;
  if (o.eps) {
    const double eps = *o.eps;
    if (!(eps > 0.0) || !std::isfinite(eps)) throw ConfigError("--eps", "must be positive");
    StudyConfig single = cfg;
    single.eps_ladder = {eps};
    const auto fam = make_family(single);
    const TimeGrid grid(cfg.T, study_steps(make_study_options(cfg), eps));
    auto noise = std::make_shared<const NoiseBlock>(gen_noise(cfg.master_seed, grid, cfg.n_paths, 1));
    return {simulate_eps_family(fam, eps, cfg.x0, grid, noise), fam.sigma_eps().bind(eps)};
  }
  const SkewParam beta(limit_skew(cfg));
  const auto g = make_coefficient(cfg.g, "g");
  const auto sigma = make_coefficient(cfg.sigma, "sigma");
  const TimeGrid grid(cfg.T, cfg.n_steps);
  auto noise = std::make_shared<const NoiseBlock>(gen_noise(cfg.master_seed, grid, cfg.n_paths, 0));
  return {simulate_skew_sde(beta, g, sigma, cfg.x0, grid, noise), sigma};
}

int cmd_simulate(const Options& o, std::ostream& out) {
  const auto ctx = load(o);
  const auto run = simulate_run(ctx, o);
  std::ostringstream csv;
  write_ensemble_csv(csv, run.paths);
  emit(ctx, "ensemble.csv", csv.str(), out);
  return kExitOk;
}

int cmd_local_time(const Options& o, std::ostream& out) {
  const auto ctx = load(o);
  const auto run = simulate_run(ctx, o);
  const double delta = ctx.cfg.delta.bandwidth(run.paths.grid());
  const auto lt = estimate_local_time(run.paths, run.sigma, delta);
  std::ostringstream csv;
  write_local_time_csv(csv, lt);
  emit(ctx, "local_time.csv", csv.str(), out);
  return kExitOk;
}

int cmd_check(const Options& o, std::ostream& out) {
  const auto ctx = load(o);
  const auto fam = make_family(ctx.cfg);
  const auto opts = make_study_options(ctx.cfg);
  const auto rep = check_conditions(fam, skew_override(ctx.cfg), ctx.cfg.x_grid,
                                    opts.condition_tolerances);
  emit(ctx, "condition_report.json", condition_report_json(rep, ctx.echo), out);
  out << "alpha = " << format_double(rep.alpha) << "\n"
      << "condition a: " << (rep.a_verdict.pass ? "pass" : "fail") << " (" << rep.a_verdict.detail
      << ")\n"
      << "condition aa: " << (rep.aa_verdict.pass ? "pass" : "fail") << " ("
      << rep.aa_verdict.detail << ")\n"
      << "condition aaa: " << (rep.aaa_verdict.pass ? "pass" : "fail") << " ("
      << rep.aaa_verdict.detail << ")\n"
      << "verdict: " << (rep.pass() ? "pass" : "fail") << "\n";
  return rep.pass() ? kExitOk : kExitVerdictFail;
}

int cmd_study(const Options& o, std::ostream& out) {
  const auto ctx = load(o);
  const auto fam = make_family(ctx.cfg);
  const auto res = convergence_study(fam, skew_override(ctx.cfg), make_study_options(ctx.cfg));
  emit(ctx, "condition_report.json", condition_report_json(res.conditions, ctx.echo), out);
  emit(ctx, "study_report.json", study_report_json(res, ctx.echo), out);
  out << "alpha = " << format_double(res.limit_alpha) << "\n";
  for (const auto& r : res.distances.rows) {
    out << "eps = " << format_double(r.eps) << " t = " << format_double(r.time)
        << " ks = " << format_double(r.ks) << " w1 = " << format_double(r.w1) << "\n";
  }
  const auto& c = res.conditions;
  out << "condition a: " << (c.a_verdict.pass ? "pass" : "fail") << "\n"
      << "condition aa: " << (c.aa_verdict.pass ? "pass" : "fail") << " (" << c.aa_verdict.detail
      << ")\n"
      << "condition aaa: " << (c.aaa_verdict.pass ? "pass" : "fail") << " ("
      << c.aaa_verdict.detail << ")\n"
      << "weak convergence: " << (res.distances.verdict.pass ? "pass" : "fail") << " ("
      << res.distances.verdict.detail << ")\n"
      << "verdict: " << (res.pass() ? "pass" : "fail") << "\n";
  return res.pass() ? kExitOk : kExitVerdictFail;
}

int cmd_verify_lemma(const Options& o, std::ostream& out) {
  const auto ctx = load(o);
  const auto& cfg = ctx.cfg;
  const auto u = cfg.lemma_u ? make_map(*cfg.lemma_u) : PiecewiseC2::identity();
  const auto g = make_coefficient(cfg.g, "g");
  const auto sigma = make_coefficient(cfg.sigma, "sigma");
  const TimeGrid grid(cfg.T, cfg.n_steps);
  const NoiseSpec noise{cfg.master_seed, 0, cfg.n_paths};
  const double delta = cfg.delta.bandwidth(grid);
  LemmaResidualReport rep;
  if (o.which == 1) {
    rep = verify_lemma1(u, g, sigma, cfg.x0, grid, noise, delta);
    out << "relative residual = " << format_double(rep.relative_residual) << "\n";
  } else {
    const SkewParam beta(cfg.lemma_beta ? *cfg.lemma_beta : limit_skew(cfg));
    rep = verify_lemma3(u, beta, g, sigma, cfg.x0, grid, noise, delta);
    out << "balance residual = " << format_double(rep.balance_residual) << "\n";
  }
  emit(ctx, "lemma" + std::to_string(o.which) + "_report.json", lemma_report_json(rep, ctx.echo),
       out);
  out << "verdict: " << (rep.pass ? "pass" : "fail") << "\n";
  return rep.pass ? kExitOk : kExitVerdictFail;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Simulation and verification of diffusions with local-time drift", "skewlab"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub, bool seed, bool eps) {
    sub->add_option("--config", o.config, "Study configuration (JSON)")->required();
    sub->add_option("--out", o.out, "Output directory (overrides output.dir)");
    if (seed) sub->add_option("--seed", o.seed, "Master seed (overrides master_seed)");
    if (eps) sub->add_option("--eps", o.eps, "Simulate the eps-family at this eps");
  };
  auto* simulate = app.add_subcommand("simulate", "Emit a path ensemble as CSV");
  common(simulate, true, true);
  auto* local_time = app.add_subcommand("local-time", "Emit local-time estimates as CSV");
  common(local_time, true, true);
  auto* check = app.add_subcommand("check", "Check the limit conditions along the eps ladder");
  common(check, false, false);
  auto* study = app.add_subcommand("study", "Full convergence study");
  common(study, true, false);
  auto* lemma = app.add_subcommand("verify-lemma", "Pathwise and expectation identities");
  common(lemma, true, false);
  lemma->add_option("--which", o.which, "Identity to check")
      ->required()
      ->check(CLI::IsMember({1, 3}));

  std::vector<std::string> rev(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
  std::reverse(rev.begin(), rev.end());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(o, out);
    if (local_time->parsed()) return cmd_local_time(o, out);
    if (check->parsed()) return cmd_check(o, out);
    if (study->parsed()) return cmd_study(o, out);
    return cmd_verify_lemma(o, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
}

int run_command(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  return run_command(std::vector<std::string>(argv, argv + argc), out, err);
}

}  // namespace skewlab
