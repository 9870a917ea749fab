#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "ivmr/data.hpp"
#include "ivmr/kernels.hpp"

namespace ivmr {

/// Evaluates a function of x row by row: one output per row of `x`.
using CovariateFn = std::function<Eigen::VectorXd(const Eigen::MatrixXd& x)>;
/// Same, for functions of (z, x); `z` holds 0.0/1.0 per row.
using InstrumentCovariateFn = std::function<Eigen::VectorXd(const Eigen::VectorXd& z, const Eigen::MatrixXd& x)>;

/// The five nuisance functions. pi(0|x) is always 1 - pi1(x).
struct NuisanceBundle {
  CovariateFn pi1;
  InstrumentCovariateFn mu;
  CovariateFn delta;
  InstrumentCovariateFn tau;
  CovariateFn rho;
};

struct TrimPolicy {
  double pi_clamp = 0.01;
  double denom_floor = 1e-3;

  void validate() const;
  kernels::TrimThresholds thresholds() const { return {pi_clamp, denom_floor}; }
};

/// All nuisance values needed at one covariate point.
struct NuisancePoint {
  double pi1 = 0.5;
  double mu0 = 0.0;
  double mu1 = 0.0;
  double delta = 0.0;
  double tau0 = 0.0;
  double tau1 = 0.0;
  double rho = 0.0;

  double pi(int z) const { return z ? pi1 : 1.0 - pi1; }
  double mu(int z) const { return z ? mu1 : mu0; }
  double tau(int z) const { return z ? tau1 : tau0; }
};

/// Column-wise nuisance values over a dataset; tau_obs is tau at the observed z.
struct NuisanceValues {
  Eigen::VectorXd pi1, mu0, mu1, delta, tau_obs, rho;

  std::size_t size() const { return static_cast<std::size_t>(pi1.size()); }
};

NuisanceValues evaluate_bundle(const NuisanceBundle& bundle, const Dataset& data);
NuisanceValues evaluate_bundle(const NuisanceBundle& bundle, const Eigen::MatrixXd& x, const Eigen::VectorXd& z);
NuisancePoint evaluate_point(const NuisanceBundle& bundle, const std::vector<double>& x);

double sigma2(double mu);
double sigma2(int z, const NuisancePoint& v);

double phi1(const Observation& o, const NuisancePoint& v, const TrimPolicy& trim,
            kernels::TrimCounts* counts = nullptr);
double phi2(const Observation& o, const NuisancePoint& v, const TrimPolicy& trim,
            kernels::TrimCounts* counts = nullptr);
double phi3(const Observation& o, const NuisancePoint& v);
double phi_eff(const Observation& o, const NuisancePoint& v, const TrimPolicy& trim,
               kernels::TrimCounts* counts = nullptr);

double phi1(const Observation& o, const NuisanceBundle& b, const TrimPolicy& trim);
double phi2(const Observation& o, const NuisanceBundle& b, const TrimPolicy& trim);
double phi3(const Observation& o, const NuisanceBundle& b);
double phi_eff(const Observation& o, const NuisanceBundle& b, const TrimPolicy& trim);

enum class InfluenceKind { phi1, phi_eff };

/// Batch evaluation through the dispatched kernel. phi1 is phi_eff with
/// (delta, tau, rho) set to zero.
kernels::TrimCounts influence_values(const Dataset& data, const NuisanceValues& v, InfluenceKind which,
                                     const TrimPolicy& trim, Eigen::VectorXd& out);

struct PluginResult {
  double value = 0.0;
  kernels::TrimCounts trim;
  Eigen::VectorXd contributions;
};

PluginResult plugin_average(const Dataset& data, const NuisanceBundle& bundle, InfluenceKind which,
                            const TrimPolicy& trim = {});

}  // namespace ivmr
