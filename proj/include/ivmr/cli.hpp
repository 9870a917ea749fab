#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ivmr/csv.hpp"
#include "ivmr/report.hpp"
#include "ivmr/simulation.hpp"

namespace ivmr {

/// Fully resolved settings for one command: config file first, then flags.
struct RunConfig {
  std::string command;  // simulate | estimate | dml | sml
  std::optional<std::string> input;
  std::optional<std::string> out;
  ReportFormat format = ReportFormat::json;
  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  ColumnMapping mapping;

  std::vector<std::string> estimators;
  /// Feature tokens per role (pi, mu, delta, tau, rho); empty means intercept plus every raw column.
  std::array<std::vector<std::string>, 5> models;

  std::vector<std::string> candidates;
  int K = 2;
  int S = 2;
  std::optional<int> reps;  // simulate: replications; dml/sml: repeated splits

  ScenarioId scenario = ScenarioId::S0;
  std::size_t n = 2000;
  bool oracle = false;
  int forest_trees = 200;
  int boosting_trees = 200;
  std::optional<std::string> data_out;

  /// MissingField / InvalidArgument for incomplete or inconsistent settings.
  void validate() const;
  /// Canonical text used for the report's config hash.
  std::string canonical() const;
};

/// Parses argv-style arguments (without the program name).
RunConfig parse_run_config(const std::vector<std::string>& args);

/// Runs the command. Exit codes: 0 success, 1 validation error, 2 estimation failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace ivmr
