#include "skewlab/io.hpp"

#include <array>
#include <charconv>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace skewlab {

using nlohmann::json;

std::string format_double(double v) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

namespace {

template <class Value>
void write_table(std::ostream& os, const TimeGrid& grid, std::size_t n_cols, Value&& value) {
  std::string line = "t";
  for (std::size_t i = 0; i < n_cols; ++i) line += ",path_" + std::to_string(i);
  line += '\n';
  os << line;
  for (std::size_t k = 0; k <= grid.n_steps(); ++k) {
    line = format_double(grid.time(k));
    for (std::size_t i = 0; i < n_cols; ++i) {
      line += ',';
      line += format_double(value(i, k));
    }
    line += '\n';
    os << line;
  }
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json verdict_json(const Verdict& v) {
  return {{"pass", v.pass}, {"tolerance", v.tolerance}, {"detail", v.detail}};
}

json rows_json(const std::vector<ResidualRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) {
    out.push_back({{"eps", r.eps},
                   {"x", r.x},
                   {"residual", number_or_null(r.residual)},
                   {"lhs", number_or_null(r.lhs)},
                   {"rhs", number_or_null(r.rhs)}});
  }
  return out;
}

json conditions_json(const ConditionReport& rep) {
  json doc;
  doc["condition_a"] = json::array({{{"eps", nullptr},
                                     {"x", nullptr},
                                     {"residual", number_or_null(rep.alpha_residual)},
                                     {"alpha", rep.alpha},
                                     {"f1", rep.f1},
                                     {"f2", rep.f2}}});
  doc["condition_aa"] = rows_json(rep.aa);
  doc["condition_aaa"] = rows_json(rep.aaa);
  doc["alpha"] = rep.alpha;
  doc["eps_ladder"] = rep.eps_ladder;
  return doc;
}

json echo_json(const std::string& echo) { return echo.empty() ? json::object() : json::parse(echo); }

std::string finish(json doc) { return doc.dump(2) + "\n"; }

}  // namespace

void write_ensemble_csv(std::ostream& os, const PathEnsemble& paths) {
  write_table(os, paths.grid(), paths.n_paths(),
              [&](std::size_t i, std::size_t k) { return paths.path(i)[k]; });
}

void write_local_time_csv(std::ostream& os, const LocalTimeEstimate& lt) {
  write_table(os, lt.grid, lt.values.size(),
              [&](std::size_t i, std::size_t k) { return lt.values[i][k]; });
}

std::string condition_report_json(const ConditionReport& rep, const std::string& config_echo) {
  json doc = conditions_json(rep);
  doc["weak_distances"] = json::array();
  doc["verdict"] = {{"pass", rep.pass()},
                    {"condition_a", verdict_json(rep.a_verdict)},
                    {"condition_aa", verdict_json(rep.aa_verdict)},
                    {"condition_aaa", verdict_json(rep.aaa_verdict)}};
  doc["config_echo"] = echo_json(config_echo);
  return finish(std::move(doc));
}

std::string study_report_json(const StudyResult& res, const std::string& config_echo) {
  json doc = conditions_json(res.conditions);
  json rows = json::array();
  for (const auto& r : res.distances.rows) {
    rows.push_back({{"eps", r.eps},
                    {"time", r.time},
                    {"n_steps", r.n_steps},
                    {"ks", r.ks},
                    {"w1", r.w1},
                    {"n_paths", r.n_paths},
                    {"n_limit", r.n_limit},
                    {"ks_q99", r.ks_half_width}});
  }
  doc["weak_distances"] = rows;
  doc["limit_n_steps"] = res.distances.limit_n_steps;
  const auto& c = res.conditions;
  doc["verdict"] = {{"pass", res.pass()},
                    {"condition_a", verdict_json(c.a_verdict)},
                    {"condition_aa", verdict_json(c.aa_verdict)},
                    {"condition_aaa", verdict_json(c.aaa_verdict)},
                    {"weak_convergence", verdict_json(res.distances.verdict)}};
  doc["config_echo"] = echo_json(config_echo);
  return finish(std::move(doc));
}

std::string lemma_report_json(const LemmaResidualReport& rep, const std::string& config_echo) {
  json doc;
  doc["lemma"] = rep.lemma;
  doc["n_paths"] = rep.n_paths;
  doc["n_steps"] = rep.n_steps;
  doc["T"] = rep.horizon;
  doc["delta"] = rep.delta;
  doc["delta_transformed"] = rep.delta_transformed;
  if (rep.lemma == 1) {
    doc["scale"] = rep.scale;
    doc["mean_local_time_x"] = rep.mean_local_time_x;
    doc["mean_local_time_y"] = rep.mean_local_time_y;
    doc["mean_residual"] = rep.mean_residual;
    doc["mean_max_residual"] = rep.mean_max_residual;
    doc["mean_terminal_residual"] = rep.mean_terminal_residual;
    doc["relative_residual"] = number_or_null(rep.relative_residual);
  } else {
    doc["local_time_coefficient"] = rep.local_time_coefficient;
    doc["mean_terminal"] = rep.mean_terminal;
    doc["mean_local_time"] = rep.mean_local_time;
    doc["mean_drift_integral"] = rep.mean_drift_integral;
    doc["balance_residual"] = rep.balance_residual;
    doc["balance_std_error"] = rep.balance_std_error;
  }
  doc["verdict"] = {{"pass", rep.pass}, {"tolerance", rep.tolerance}};
  doc["config_echo"] = echo_json(config_echo);
  return finish(std::move(doc));
}

void write_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  out << content;
  if (!out) throw Error("failed writing '" + path + "'");
}

}  // namespace skewlab
