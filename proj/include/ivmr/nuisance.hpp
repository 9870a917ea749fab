#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "ivmr/data.hpp"
#include "ivmr/influence.hpp"
#include "ivmr/learners.hpp"

namespace ivmr {

/// Nuisance roles in tuple order.
enum class Role { pi = 0, mu = 1, delta = 2, tau = 3, rho = 4 };

constexpr std::array<Role, 5> kRoles{Role::pi, Role::mu, Role::delta, Role::tau, Role::rho};

std::string_view to_string(Role r);
Family role_family(Role r);
/// mu and tau take (z, x); the others x only.
bool role_uses_z(Role r);

/// One entry of a per-role candidate list: a learner to fit, or a fixed function.
struct Candidate {
  std::string name;
  std::optional<LearnerKind> learner;
  InstrumentCovariateFn fixed;

  static Candidate learned(const LearnerKind& kind);
  static Candidate fixed_x(std::string name, CovariateFn f);
  static Candidate fixed_zx(std::string name, InstrumentCovariateFn f);
};

/// A fitted nuisance function evaluated at (z, x).
class Component {
 public:
  Component() = default;
  Component(bool uses_z, std::shared_ptr<const FittedLearner> learner);
  Component(bool uses_z, InstrumentCovariateFn fixed);

  Eigen::VectorXd operator()(const Eigen::VectorXd& z, const Eigen::MatrixXd& x) const;
  bool uses_z() const { return uses_z_; }
  const FittedLearner* learner() const { return learner_.get(); }

 private:
  bool uses_z_ = false;
  std::shared_ptr<const FittedLearner> learner_;
  InstrumentCovariateFn fixed_;
};

/// Training fold, materialized once and shared by every role fit.
struct TrainingData {
  Eigen::MatrixXd x;
  Eigen::VectorXd y, a, z;
  Dataset data;

  explicit TrainingData(const Dataset& d);
};

Eigen::MatrixXd role_features(Role r, const Eigen::VectorXd& z, const Eigen::MatrixXd& x);

Component fit_pi(const TrainingData& t, const Candidate& c, std::uint64_t seed);
Component fit_mu(const TrainingData& t, const Candidate& c, std::uint64_t seed);

struct DeltaFit {
  Component delta;
  std::size_t winsorized = 0;
};

/// Regresses the winsorized phi1(O; pi, mu) pseudo-outcome on x.
DeltaFit fit_delta(const TrainingData& t, const Candidate& c, const Component& pi, const Component& mu,
                   const TrimPolicy& trim, std::uint64_t seed);
/// Regresses Y - delta(X) A on (z, x).
Component fit_tau(const TrainingData& t, const Candidate& c, const Component& delta, std::uint64_t seed);
/// Regresses (A - mu(Z,X)) (Y - delta(X) A) on x.
Component fit_rho(const TrainingData& t, const Candidate& c, const Component& mu, const Component& delta,
                  std::uint64_t seed);

NuisanceBundle make_bundle(const Component& pi, const Component& mu, const Component& delta, const Component& tau,
                           const Component& rho);

/// Clips to the 1st/99th percentiles in place; returns the number of values changed.
std::size_t winsorize(Eigen::VectorXd& v, double lo_q = 0.01, double hi_q = 0.99);

/// Learner kinds for (pi, mu, delta, tau, rho).
struct NuisanceLearnerSet {
  std::array<LearnerKind, 5> kinds;

  /// The same learner type in every role with role-appropriate families.
  static NuisanceLearnerSet uniform(LearnerType type);
  void validate() const;
};

struct FittedBundle {
  NuisanceBundle bundle;
  std::size_t winsorized = 0;
};

FittedBundle fit_nuisance_sequence(const Dataset& train, const NuisanceLearnerSet& kinds, const TrimPolicy& trim,
                                   std::uint64_t seed);
FittedBundle fit_nuisance_sequence(const Dataset& train, const std::array<Candidate, 5>& candidates,
                                   const TrimPolicy& trim, std::uint64_t seed);

/// Seed used for role r (and candidate index k) inside the sequential fit.
std::uint64_t role_seed(std::uint64_t seed, Role r, std::size_t candidate = 0);

}  // namespace ivmr
