#pragma once

#include <ostream>
#include <string>

#include "skewlab/convergence.hpp"
#include "skewlab/simulate.hpp"

namespace skewlab {

/// Shortest decimal that reads back to the same double; '.' separator,
/// independent of the global locale.
std::string format_double(double v);

/// Header `t,path_0,path_1,...`, then one row per grid time.
void write_ensemble_csv(std::ostream& os, const PathEnsemble& paths);
void write_local_time_csv(std::ostream& os, const LocalTimeEstimate& lt);

/// Report documents. `config_echo` is the JSON text from echo_config and is
/// embedded as an object.
std::string condition_report_json(const ConditionReport& rep, const std::string& config_echo);
std::string study_report_json(const StudyResult& res, const std::string& config_echo);
std::string lemma_report_json(const LemmaResidualReport& rep, const std::string& config_echo);

/// Writes `content` to `path`, creating parent directories.
void write_file(const std::string& path, const std::string& content);

}  // namespace skewlab
