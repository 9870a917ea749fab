#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ivmr/data.hpp"
#include "ivmr/influence.hpp"
#include "ivmr/learners.hpp"
#include "ivmr/parametric.hpp"

namespace ivmr {

/// ATE of the simulation design.
constexpr double kTrueAte = 1.5;
constexpr std::size_t kSimDim = 5;

struct SimulatedData {
  Dataset data;
  Eigen::VectorXd u;         // hidden confounder, kept for diagnostics
  std::size_t clamped = 0;   // rows whose treatment probability left [0, 1]
};

/// Five uniform covariates, truncated-normal confounder, invalid instrument.
SimulatedData generate_dataset(std::size_t n, std::uint64_t seed);

/// Row-wise true nuisances on raw covariates.
double true_pi1(std::span<const double> x);
double true_mu(int z, std::span<const double> x);
double true_delta(std::span<const double> x);
double true_tau(int z, std::span<const double> x);
double true_rho(std::span<const double> x);
NuisanceBundle truth_bundle();

enum class ScenarioId { S0, S1, S2, S3 };

std::string_view to_string(ScenarioId s);
ScenarioId parse_scenario(std::string_view name);

/// Which of (pi, mu, delta, tau, rho) are correctly specified.
std::array<bool, 5> scenario_correctness(ScenarioId s);
WorkingModels scenario_models(ScenarioId s);

struct MonteCarloConfig {
  std::size_t n = 2000;
  int replications = 200;
  ScenarioId scenario = ScenarioId::S0;
  std::vector<std::string> estimators{"mr"};
  std::uint64_t seed = 0;
  unsigned threads = 0;  // replication workers; 0 = process default
  int K = 2;
  int S = 2;
  /// Learner types forming every role's SML candidate list.
  std::vector<LearnerType> sml_candidates{LearnerType::lasso, LearnerType::forest, LearnerType::boosting};
  /// Appends the true nuisance as an extra SML candidate in every role.
  bool sml_oracle = false;
  int forest_trees = 200;
  int boosting_trees = 200;

  void validate() const;
};

/// Names accepted in MonteCarloConfig::estimators.
const std::vector<std::string>& monte_carlo_estimators();

struct EstimatorSummary {
  std::string name;
  int replications = 0;
  int failures = 0;
  double mean = 0.0;
  double bias = 0.0;
  double sd = 0.0;
  double rmse = 0.0;
  double median_bias = 0.0;
  double coverage = 0.0;
  double mean_se = 0.0;
  std::vector<double> estimates;   // successful replications, in replication order
  std::vector<double> std_errors;
  std::vector<std::string> errors;  // one message per failed replication
};

struct MonteCarloSummary {
  MonteCarloConfig config;
  std::vector<EstimatorSummary> estimators;
  std::size_t clamped = 0;

  const EstimatorSummary& at(std::string_view name) const;
};

MonteCarloSummary run_monte_carlo(const MonteCarloConfig& config);

/// Aggregates raw per-replication values; nan marks a failed replication.
EstimatorSummary summarize(std::string name, const std::vector<double>& estimates,
                           const std::vector<double>& std_errors, double truth = kTrueAte);

}  // namespace ivmr
