#include "skewlab/config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include <json.hpp>

namespace skewlab {

using nlohmann::json;

ConfigError::ConfigError(std::string field, const std::string& message)
    : ValidationError("config" + (field.empty() ? std::string() : "." + field) + ": " + message),
      field_(std::move(field)) {}

double DeltaRule::bandwidth(const TimeGrid& grid) const {
  return kind == Kind::SqrtDt ? value * std::sqrt(grid.dt()) : value;
}

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::string index(const std::string& path, std::size_t i) {
  return path + "[" + std::to_string(i) + "]";
}

void only_keys(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw ConfigError(path, "expected an object");
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) throw ConfigError(join(path, item.key()), "unknown key");
  }
}

const json* find(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

const json& require(const json& obj, const std::string& path, const char* key) {
  const json* v = find(obj, key);
  if (!v) throw ConfigError(join(path, key), "missing required key");
  return *v;
}

double finite_number(const json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(path, "expected a finite number");
  return d;
}

std::uint64_t unsigned_integer(const json& v, const std::string& path) {
  if (!v.is_number_unsigned()) throw ConfigError(path, "expected a nonnegative integer");
  return v.get<std::uint64_t>();
}

CoefficientExpr expression(const json& v, const std::string& path, const ParamTable& params) {
  if (!v.is_string()) throw ConfigError(path, "expected an expression string");
  try {
    return parse_expr(v.get<std::string>(), params);
  } catch (const SyntaxError& e) {
    throw ConfigError(path, e.what());
  }
}

/// Number, or expression string without x and eps.
double constant(const json& v, const std::string& path, const ParamTable& params) {
  if (v.is_number()) return finite_number(v, path);
  const auto e = expression(v, path, params);
  if (e.uses_x() || e.uses_eps()) throw ConfigError(path, "must not depend on x or eps");
  double d = 0.0;
  try {
    d = e(0.0, 0.0);
  } catch (const EvalError& err) {
    throw ConfigError(path, err.what());
  }
  if (!std::isfinite(d)) throw ConfigError(path, "evaluates to a non-finite value");
  return d;
}

CoefficientSpec coefficient(const json& v, const std::string& path, const ParamTable& params) {
  only_keys(v, path, {"expr", "breakpoints"});
  CoefficientSpec spec;
  spec.expr = expression(require(v, path, "expr"), join(path, "expr"), params);
  if (const json* bps = find(v, "breakpoints")) {
    const std::string bpath = join(path, "breakpoints");
    if (!bps->is_array()) throw ConfigError(bpath, "expected an array of expressions");
    for (std::size_t i = 0; i < bps->size(); ++i) {
      const auto& item = (*bps)[i];
      auto e = item.is_number() ? parse_expr(json(item).dump(), params)
                                : expression(item, index(bpath, i), params);
      if (e.uses_x()) throw ConfigError(index(bpath, i), "breakpoints may depend on eps only");
      spec.breakpoints.push_back(std::move(e));
    }
  }
  return spec;
}

BranchSpec branch(const json& v, const std::string& path, const ParamTable& params) {
  only_keys(v, path, {"value", "d1", "d2"});
  BranchSpec b;
  b.value = expression(require(v, path, "value"), join(path, "value"), params);
  b.d1 = expression(require(v, path, "d1"), join(path, "d1"), params);
  b.d2 = expression(require(v, path, "d2"), join(path, "d2"), params);
  for (const auto& [key, e] : {std::pair{"value", &b.value}, std::pair{"d1", &b.d1},
                                std::pair{"d2", &b.d2}}) {
    if (e->uses_eps()) throw ConfigError(join(path, key), "branch expressions may depend on x only");
  }
  return b;
}

MapSpec map_spec(const json& v, const std::string& path, const ParamTable& params) {
  only_keys(v, path, {"left", "right"});
  MapSpec m{branch(require(v, path, "left"), join(path, "left"), params),
            branch(require(v, path, "right"), join(path, "right"), params)};
  try {
    (void)make_map(m);
  } catch (const ValidationError& e) {
    throw ConfigError(path, e.what());
  } catch (const EvalError& e) {
    throw ConfigError(path, e.what());
  }
  return m;
}

std::vector<double> number_array(const json& v, const std::string& path) {
  if (!v.is_array()) throw ConfigError(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(finite_number(v[i], index(path, i)));
  return out;
}

json coefficient_json(const CoefficientSpec& spec) {
  json bps = json::array();
  for (const auto& b : spec.breakpoints) bps.push_back(b.source());
  return json{{"expr", spec.expr.source()}, {"breakpoints", bps}};
}

json branch_json(const BranchSpec& b) {
  return json{{"value", b.value.source()}, {"d1", b.d1.source()}, {"d2", b.d2.source()}};
}

json map_json(const MapSpec& m) {
  return json{{"left", branch_json(m.left)}, {"right", branch_json(m.right)}};
}

SmoothBranch to_branch(const BranchSpec& b, Side side) {
  return {[e = b.value](double x) { return e(x); }, [e = b.d1](double x) { return e(x); },
          [e = b.d2](double x) { return e(x); }, side};
}

}  // namespace

StudyConfig parse_config(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text.begin(), json_text.end());
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("invalid JSON: ") + e.what());
  }
  only_keys(doc, "",
            {"params", "coefficients", "limit_f", "skew", "class_bounds", "x0", "T", "n_steps",
             "eps_ladder", "n_paths", "master_seed", "delta_rule", "x_grid", "multi_time",
             "tolerances", "lemma", "output"});

  StudyConfig cfg;
  if (const json* p = find(doc, "params")) {
    if (!p->is_object()) throw ConfigError("params", "expected an object");
    for (const auto& item : p->items()) {
      const std::string path = join("params", item.key());
      const std::string& name = item.key();
      bool ident = !name.empty() && !std::isdigit(static_cast<unsigned char>(name[0]));
      for (char c : name) ident = ident && (std::isalnum(static_cast<unsigned char>(c)) || c == '_');
      if (!ident) throw ConfigError(path, "parameter names must be identifiers");
      static const std::set<std::string> reserved{"x",   "eps", "exp", "abs",      "tanh",
                                                  "sgn", "min", "max", "indicator"};
      if (reserved.count(name)) throw ConfigError(path, "'" + name + "' is a reserved name");
      cfg.params[name] = finite_number(item.value(), path);
    }
  }

  const json& coeffs = require(doc, "", "coefficients");
  only_keys(coeffs, "coefficients", {"b_eps", "g_eps", "sigma_eps", "g", "sigma"});
  auto coeff = [&](const char* key, CoefficientSpec& out, const char* fallback) {
    const std::string path = join("coefficients", key);
    if (const json* c = find(coeffs, key)) {
      out = coefficient(*c, path, cfg.params);
    } else {
      out.expr = parse_expr(fallback);
    }
    if (std::string(key) == "g" || std::string(key) == "sigma") {
      if (out.expr.uses_eps()) throw ConfigError(join(path, "expr"), "limit coefficient depends on eps");
      for (std::size_t i = 0; i < out.breakpoints.size(); ++i) {
        if (out.breakpoints[i].uses_eps())
          throw ConfigError(index(join(path, "breakpoints"), i), "limit breakpoints depend on eps");
      }
    }
  };
  coeff("b_eps", cfg.b_eps, "0");
  coeff("g_eps", cfg.g_eps, "0");
  coeff("sigma_eps", cfg.sigma_eps, "1");
  coeff("g", cfg.g, "0");
  coeff("sigma", cfg.sigma, "1");

  if (const json* f = find(doc, "limit_f")) cfg.limit_f = map_spec(*f, "limit_f", cfg.params);

  if (const json* s = find(doc, "skew")) {
    only_keys(*s, "skew", {"alpha", "beta"});
    if (find(*s, "alpha") && find(*s, "beta"))
      throw ConfigError("skew", "give either alpha or beta, not both");
    if (const json* a = find(*s, "alpha")) cfg.alpha = constant(*a, "skew.alpha", cfg.params);
    if (const json* b = find(*s, "beta")) cfg.beta = constant(*b, "skew.beta", cfg.params);
    for (const auto& [key, val] : {std::pair{"alpha", cfg.alpha}, std::pair{"beta", cfg.beta}}) {
      if (val && !(std::abs(*val) < 1.0))
        throw ConfigError(join("skew", key), "skew coefficient must satisfy |beta| < 1");
    }
  }

  if (const json* cb = find(doc, "class_bounds")) {
    only_keys(*cb, "class_bounds", {"lambda", "Lambda"});
    cfg.lambda = finite_number(require(*cb, "class_bounds", "lambda"), "class_bounds.lambda");
    cfg.Lambda = finite_number(require(*cb, "class_bounds", "Lambda"), "class_bounds.Lambda");
    if (!(cfg.lambda > 0.0)) throw ConfigError("class_bounds.lambda", "must be positive");
    if (!(cfg.Lambda >= cfg.lambda))
      throw ConfigError("class_bounds.Lambda", "must be at least lambda");
  }

  if (const json* v = find(doc, "x0")) cfg.x0 = finite_number(*v, "x0");
  if (const json* v = find(doc, "T")) cfg.T = finite_number(*v, "T");
  if (!(cfg.T > 0.0)) throw ConfigError("T", "must be positive");
  if (const json* v = find(doc, "n_steps")) cfg.n_steps = unsigned_integer(*v, "n_steps");
  if (cfg.n_steps < 1) throw ConfigError("n_steps", "must be at least 1");
  if (const json* v = find(doc, "n_paths")) cfg.n_paths = unsigned_integer(*v, "n_paths");
  if (cfg.n_paths < 1) throw ConfigError("n_paths", "must be at least 1");
  if (const json* v = find(doc, "master_seed")) cfg.master_seed = unsigned_integer(*v, "master_seed");

  cfg.eps_ladder = number_array(require(doc, "", "eps_ladder"), "eps_ladder");
  if (cfg.eps_ladder.empty()) throw ConfigError("eps_ladder", "must not be empty");
  for (std::size_t i = 0; i < cfg.eps_ladder.size(); ++i) {
    if (!(cfg.eps_ladder[i] > 0.0)) throw ConfigError(index("eps_ladder", i), "must be positive");
    if (i > 0 && !(cfg.eps_ladder[i] < cfg.eps_ladder[i - 1]))
      throw ConfigError(index("eps_ladder", i), "ladder must be strictly decreasing");
  }

  if (const json* d = find(doc, "delta_rule")) {
    only_keys(*d, "delta_rule", {"kind", "factor", "value"});
    const json& kind = require(*d, "delta_rule", "kind");
    if (kind == "sqrt_dt") {
      cfg.delta.kind = DeltaRule::Kind::SqrtDt;
      if (find(*d, "value")) throw ConfigError("delta_rule.value", "not used with kind sqrt_dt");
      if (const json* f = find(*d, "factor")) cfg.delta.value = finite_number(*f, "delta_rule.factor");
    } else if (kind == "fixed") {
      cfg.delta.kind = DeltaRule::Kind::Fixed;
      if (find(*d, "factor")) throw ConfigError("delta_rule.factor", "not used with kind fixed");
      cfg.delta.value = finite_number(require(*d, "delta_rule", "value"), "delta_rule.value");
    } else {
      throw ConfigError("delta_rule.kind", "expected \"sqrt_dt\" or \"fixed\"");
    }
    if (!(cfg.delta.value > 0.0))
      throw ConfigError(cfg.delta.kind == DeltaRule::Kind::Fixed ? "delta_rule.value"
                                                                 : "delta_rule.factor",
                        "must be positive");
  }

  if (const json* v = find(doc, "x_grid")) cfg.x_grid = number_array(*v, "x_grid");
  if (const json* v = find(doc, "multi_time")) {
    if (!v->is_boolean()) throw ConfigError("multi_time", "expected true or false");
    cfg.multi_time = v->get<bool>();
  }

  if (const json* t = find(doc, "tolerances")) {
    only_keys(*t, "tolerances", {"condition", "ks_threshold_factor", "ks_slack_factor"});
    auto positive = [&](const char* key, double& out) {
      if (const json* v = find(*t, key)) {
        out = finite_number(*v, join("tolerances", key));
        if (!(out > 0.0)) throw ConfigError(join("tolerances", key), "must be positive");
      }
    };
    positive("condition", cfg.condition_tolerance);
    positive("ks_threshold_factor", cfg.ks_threshold_factor);
    positive("ks_slack_factor", cfg.ks_slack_factor);
  }

  if (const json* l = find(doc, "lemma")) {
    only_keys(*l, "lemma", {"u", "beta"});
    if (const json* u = find(*l, "u")) cfg.lemma_u = map_spec(*u, "lemma.u", cfg.params);
    if (const json* b = find(*l, "beta")) {
      cfg.lemma_beta = constant(*b, "lemma.beta", cfg.params);
      if (!(std::abs(*cfg.lemma_beta) < 1.0))
        throw ConfigError("lemma.beta", "skew coefficient must satisfy |beta| < 1");
    }
  }

  if (const json* o = find(doc, "output")) {
    only_keys(*o, "output", {"dir"});
    const json& dir = require(*o, "output", "dir");
    if (!dir.is_string()) throw ConfigError("output.dir", "expected a string");
    cfg.output_dir = dir.get<std::string>();
  }
  return cfg;
}

StudyConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string echo_config(const StudyConfig& cfg) {
  json doc;
  doc["params"] = json::object();
  for (const auto& [name, value] : cfg.params) doc["params"][name] = value;
  doc["coefficients"] = {{"b_eps", coefficient_json(cfg.b_eps)},
                         {"g_eps", coefficient_json(cfg.g_eps)},
                         {"sigma_eps", coefficient_json(cfg.sigma_eps)},
                         {"g", coefficient_json(cfg.g)},
                         {"sigma", coefficient_json(cfg.sigma)}};
  if (cfg.limit_f) doc["limit_f"] = map_json(*cfg.limit_f);
  if (cfg.alpha) doc["skew"] = {{"alpha", *cfg.alpha}};
  if (cfg.beta) doc["skew"] = {{"beta", *cfg.beta}};
  doc["class_bounds"] = {{"lambda", cfg.lambda}, {"Lambda", cfg.Lambda}};
  doc["x0"] = cfg.x0;
  doc["T"] = cfg.T;
  doc["n_steps"] = cfg.n_steps;
  doc["eps_ladder"] = cfg.eps_ladder;
  doc["n_paths"] = cfg.n_paths;
  doc["master_seed"] = cfg.master_seed;
  if (cfg.delta.kind == DeltaRule::Kind::SqrtDt)
    doc["delta_rule"] = {{"kind", "sqrt_dt"}, {"factor", cfg.delta.value}};
  else
    doc["delta_rule"] = {{"kind", "fixed"}, {"value", cfg.delta.value}};
  doc["x_grid"] = cfg.x_grid;
  doc["multi_time"] = cfg.multi_time;
  doc["tolerances"] = {{"condition", cfg.condition_tolerance},
                       {"ks_threshold_factor", cfg.ks_threshold_factor},
                       {"ks_slack_factor", cfg.ks_slack_factor}};
  json lemma = json::object();
  if (cfg.lemma_u) lemma["u"] = map_json(*cfg.lemma_u);
  if (cfg.lemma_beta) lemma["beta"] = *cfg.lemma_beta;
  if (!lemma.empty()) doc["lemma"] = lemma;
  return doc.dump(2);
}

ScalarCoefficient make_coefficient(const CoefficientSpec& spec, std::string label) {
  ScalarCoefficient::BreakpointFn bps;
  if (!spec.breakpoints.empty()) {
    bps = [exprs = spec.breakpoints](double eps) {
      std::vector<double> out;
      out.reserve(exprs.size());
      for (const auto& e : exprs) out.push_back(e(0.0, eps));
      return out;
    };
  }
  return ScalarCoefficient([e = spec.expr](double x, double eps) { return e(x, eps); },
                           std::move(label), std::move(bps));
}

PiecewiseC2 make_map(const MapSpec& spec) {
  return PiecewiseC2(to_branch(spec.left, Side::Left), to_branch(spec.right, Side::Right));
}

double limit_skew(const StudyConfig& cfg) {
  if (cfg.alpha) return *cfg.alpha;
  if (cfg.beta) return *cfg.beta;
  const auto f = cfg.limit_f ? make_map(*cfg.limit_f) : PiecewiseC2::identity();
  return alpha_limit(f.left_slope(), f.right_slope());
}

CoefficientFamily make_family(const StudyConfig& cfg) {
  FamilyParts parts;
  parts.b_eps = make_coefficient(cfg.b_eps, "b_eps");
  parts.g_eps = make_coefficient(cfg.g_eps, "g_eps");
  parts.sigma_eps = make_coefficient(cfg.sigma_eps, "sigma_eps");
  parts.limit_g = make_coefficient(cfg.g, "g");
  parts.limit_sigma = make_coefficient(cfg.sigma, "sigma");
  if (cfg.limit_f) parts.limit_f = make_map(*cfg.limit_f);
  parts.lambda_bound = cfg.lambda;
  parts.Lambda_bound = cfg.Lambda;
  return CoefficientFamily(std::move(parts), cfg.eps_ladder);
}

StudyOptions make_study_options(const StudyConfig& cfg) {
  StudyOptions opts;
  opts.x0 = cfg.x0;
  opts.horizon = cfg.T;
  opts.n_steps = cfg.n_steps;
  opts.n_paths = cfg.n_paths;
  opts.master_seed = cfg.master_seed;
  opts.x_grid = cfg.x_grid;
  opts.multi_time = cfg.multi_time;
  opts.condition_tolerances.integral = cfg.condition_tolerance;
  opts.ks_threshold_factor = cfg.ks_threshold_factor;
  opts.ks_slack_factor = cfg.ks_slack_factor;
  return opts;
}

}  // namespace skewlab
