#pragma once

#include <cstdint>
#include <functional>
#include <utility>

#include <Eigen/Dense>

#include "ivmr/data.hpp"
#include "ivmr/estimate.hpp"
#include "ivmr/influence.hpp"
#include "ivmr/numerics.hpp"

namespace ivmr {

/// Feature specs for the five working models. mu and tau additionally get a
/// leading z column, so theta = (theta_z, theta_x) and beta = (beta_z, beta_x).
struct WorkingModels {
  CovariateSpec pi;
  CovariateSpec mu;
  CovariateSpec delta;
  CovariateSpec tau;
  CovariateSpec rho;

  void validate(std::size_t p) const;
};

struct ParametricConfig {
  SolverConfig solver;
  TrimPolicy trim;
  /// Seed for the perturbed restarts of the stage-2 solver.
  std::uint64_t seed = 0;
  int restarts = 5;
};

struct Stage1Fit {
  Eigen::VectorXd gamma;
  Eigen::VectorXd theta;
  FitResult pi_fit;
  FitResult mu_fit;
};

struct Stage2Fit {
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;
  Eigen::VectorXd xi;
  FitResult solve;
  int restarts = 0;
};

Stage1Fit fit_stage1(const Dataset& data, const WorkingModels& models, const SolverConfig& solver = {});
Stage2Fit fit_stage2(const Dataset& data, const WorkingModels& models, const Stage1Fit& stage1,
                     const ParametricConfig& config = {});

/// Nuisance functions implied by fitted coefficients.
NuisanceBundle parametric_bundle(const WorkingModels& models, const Eigen::VectorXd& gamma,
                                 const Eigen::VectorXd& theta, const Eigen::VectorXd& alpha,
                                 const Eigen::VectorXd& beta, const Eigen::VectorXd& xi);

EstimateReport estimate_mr(const Dataset& data, const WorkingModels& models, const ParametricConfig& config = {});
EstimateReport estimate_delta1(const Dataset& data, const WorkingModels& models,
                               const ParametricConfig& config = {});
EstimateReport estimate_genius(const Dataset& data, const WorkingModels& models,
                               const ParametricConfig& config = {});
EstimateReport estimate_genius_eff(const Dataset& data, const WorkingModels& models,
                                   const ParametricConfig& config = {});

/// Design used by the naive comparators: covariate features for the outcome
/// regressions and the delta spec for tsiv (intercept only by default).
struct BenchmarkModels {
  CovariateSpec covariates;
  CovariateSpec delta;

  static BenchmarkModels defaults(std::size_t p);
};

std::pair<EstimateReport, EstimateReport> estimate_benchmarks(const Dataset& data, const BenchmarkModels& models,
                                                              const ParametricConfig& config = {});

/// psi -> n x m matrix of per-observation moment contributions.
using MomentContributions = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

/// J^-1 M J^-T / n with J the numeric Jacobian of the column means and M the
/// mean outer product of the contributions at psi_hat.
Eigen::MatrixXd sandwich_variance(const MomentContributions& g, const Eigen::VectorXd& psi_hat,
                                  double step = 1e-6);

}  // namespace ivmr
