#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "skewlab/coefficients.hpp"
#include "skewlab/convergence.hpp"
#include "skewlab/errors.hpp"
#include "skewlab/expr.hpp"
#include "skewlab/piecewise.hpp"
#include "skewlab/simulate.hpp"
#include "skewlab/transforms.hpp"

namespace skewlab {

/// Invalid configuration; field() is a dotted path such as
/// "coefficients.b_eps.expr" or "eps_ladder[2]".
class ConfigError : public ValidationError {
 public:
  ConfigError(std::string field, const std::string& message);
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// A coefficient expression in (x, eps) with breakpoint expressions in eps.
struct CoefficientSpec {
  CoefficientExpr expr;
  std::vector<CoefficientExpr> breakpoints;
};

/// One branch of a piecewise map: value, first and second derivative in x.
struct BranchSpec {
  CoefficientExpr value;
  CoefficientExpr d1;
  CoefficientExpr d2;
};

struct MapSpec {
  BranchSpec left;
  BranchSpec right;
};

struct DeltaRule {
  enum class Kind { SqrtDt, Fixed };
  Kind kind = Kind::SqrtDt;
  /// Multiplier of sqrt(dt) for SqrtDt, the window itself for Fixed.
  double value = 2.0;

  double bandwidth(const TimeGrid& grid) const;
};

struct StudyConfig {
  ParamTable params;
  CoefficientSpec b_eps;
  CoefficientSpec g_eps;
  CoefficientSpec sigma_eps;
  CoefficientSpec g;
  CoefficientSpec sigma;
  /// Limit f; the identity when not given.
  std::optional<MapSpec> limit_f;
  /// Local-time coefficient of the limit; exactly one key may be set.
  std::optional<double> alpha;
  std::optional<double> beta;
  double lambda = 1.0;
  double Lambda = 1.0;

  double x0 = 0.0;
  double T = 1.0;
  std::size_t n_steps = 1000;
  std::vector<double> eps_ladder;
  std::size_t n_paths = 1000;
  std::uint64_t master_seed = 0;
  DeltaRule delta;
  std::vector<double> x_grid{-1.0, -0.5, 0.5, 1.0};
  bool multi_time = false;
  double ks_threshold_factor = 3.0;
  double ks_slack_factor = 1.0;
  double condition_tolerance = 1e-2;

  /// Map u for the lemma checks; the identity when not given.
  std::optional<MapSpec> lemma_u;
  /// Skew coefficient of the lemma-3 driver; falls back to beta / alpha.
  std::optional<double> lemma_beta;

  std::string output_dir = ".";
};

/// Parses and validates a JSON document. Unknown keys are rejected.
StudyConfig parse_config(std::string_view json_text);
StudyConfig load_config(const std::string& path);

/// Fully resolved configuration as canonical JSON text. The output
/// directory is left out so that reruns into another directory produce
/// identical reports; parse_config(echo_config(c)) reproduces c.
std::string echo_config(const StudyConfig& cfg);

ScalarCoefficient make_coefficient(const CoefficientSpec& spec, std::string label);
PiecewiseC2 make_map(const MapSpec& spec);

/// Skew coefficient of the limit: alpha or beta as given, otherwise derived
/// from the slopes of the limit f.
double limit_skew(const StudyConfig& cfg);

CoefficientFamily make_family(const StudyConfig& cfg);
StudyOptions make_study_options(const StudyConfig& cfg);

}  // namespace skewlab
