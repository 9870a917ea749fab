#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ivmr/data.hpp"
#include "ivmr/estimate.hpp"
#include "ivmr/influence.hpp"
#include "ivmr/nuisance.hpp"

namespace ivmr {

/// Zero-based candidate indices in role order (pi, mu, delta, tau, rho).
using LearnerTuple = std::array<std::size_t, 5>;

std::string format_tuple(const LearnerTuple& t);  // one-based, e.g. "(1,2,1,3,1)"

/// Role positions (zero-based) of the three robustness index sets.
struct IndexSets {
  static const std::vector<std::size_t>& upsilon(int k);  // k in {1,2,3}
  static std::vector<std::size_t> complement(int k);
};

struct CandidateLists {
  std::array<std::vector<Candidate>, 5> lists;

  std::array<std::size_t, 5> sizes() const;
  std::size_t tuple_count() const;
  /// The same candidates for every role.
  static CandidateLists uniform(const std::vector<LearnerType>& types);
};

struct SmlConfig {
  int S = 2;
  std::uint64_t seed = 0;
  TrimPolicy trim;
  std::size_t cap = 1024;
};

/// Validation-half influence values per split and tuple.
struct SplitCache {
  std::array<std::size_t, 5> r{1, 1, 1, 1, 1};
  int S = 0;
  std::vector<std::vector<std::size_t>> train_rows;
  std::vector<std::vector<std::size_t>> valid_rows;
  std::vector<std::vector<Eigen::VectorXd>> values;  // [split][tuple index]
  std::vector<std::vector<double>> means;            // [split][tuple index]
  std::vector<std::vector<kernels::TrimCounts>> trims;
  std::vector<std::vector<std::size_t>> winsorized;
  std::vector<std::size_t> fitted_models;  // per split

  std::size_t tuple_count() const;
  /// Mixed radix with the pi index most significant, so index order is lexicographic.
  std::size_t index(const LearnerTuple& t) const;
  LearnerTuple tuple(std::size_t index) const;
  double mean(int split, const LearnerTuple& t) const { return means[static_cast<std::size_t>(split)][index(t)]; }
};

/// Number of fitted models per split when every candidate is a learner.
std::size_t dependency_fit_count(const std::array<std::size_t, 5>& r);

SplitCache build_cache(const Dataset& data, const CandidateLists& candidates, const SmlConfig& config);

double lambda_dagger(const LearnerTuple& t, int k, const SplitCache& cache);
double lambda_ddagger(const LearnerTuple& t, int k, const SplitCache& cache);

enum class Criterion { dagger, ddagger };

struct PseudoRiskRow {
  LearnerTuple tuple{};
  std::array<double, 3> lambda_dagger{};
  double risk_dagger = 0.0;
  std::array<double, 3> lambda_ddagger{};
  double risk_ddagger = 0.0;
};

using PseudoRiskTable = std::vector<PseudoRiskRow>;

PseudoRiskTable compute_risk_table(const SplitCache& cache);

struct SmlResult {
  LearnerTuple selected{};
  EstimateReport report;
  PseudoRiskTable table;
};

/// Argmin of the chosen risk over the table; ties go to the lexicographically smallest tuple.
SmlResult select_from_cache(const SplitCache& cache, const PseudoRiskTable& table, Criterion criterion);

SmlResult select_and_estimate(const Dataset& data, const CandidateLists& candidates, const SmlConfig& config,
                              Criterion criterion);

}  // namespace ivmr
