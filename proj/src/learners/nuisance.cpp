#include "ivmr/nuisance.hpp"

#include <algorithm>

#include "ivmr/error.hpp"
#include "ivmr/numerics.hpp"

namespace ivmr {

std::string_view to_string(Role r) {
  switch (r) {
    case Role::pi: return "pi";
    case Role::mu: return "mu";
    case Role::delta: return "delta";
    case Role::tau: return "tau";
    case Role::rho: return "rho";
  }
  return "unknown";
}

Family role_family(Role r) { return r == Role::pi || r == Role::mu ? Family::binary : Family::continuous; }

bool role_uses_z(Role r) { return r == Role::mu || r == Role::tau; }

Candidate Candidate::learned(const LearnerKind& kind) {
  kind.validate();
  return Candidate{kind.name(), kind, {}};
}

Candidate Candidate::fixed_x(std::string name, CovariateFn f) {
  return Candidate{std::move(name), std::nullopt,
                   [f = std::move(f)](const Eigen::VectorXd&, const Eigen::MatrixXd& x) { return f(x); }};
}

Candidate Candidate::fixed_zx(std::string name, InstrumentCovariateFn f) {
  return Candidate{std::move(name), std::nullopt, std::move(f)};
}

Component::Component(bool uses_z, std::shared_ptr<const FittedLearner> learner)
    : uses_z_(uses_z), learner_(std::move(learner)) {}

Component::Component(bool uses_z, InstrumentCovariateFn fixed) : uses_z_(uses_z), fixed_(std::move(fixed)) {}

Eigen::VectorXd Component::operator()(const Eigen::VectorXd& z, const Eigen::MatrixXd& x) const {
  if (learner_) {
    if (!uses_z_) return learner_->predict(x);
    Eigen::MatrixXd f(x.rows(), x.cols() + 1);
    f.col(0) = z;
    f.rightCols(x.cols()) = x;
    return learner_->predict(f);
  }
  if (!fixed_) throw Error(ErrorCode::InvalidArgument, "empty nuisance component");
  return fixed_(z, x);
}

TrainingData::TrainingData(const Dataset& d)
    : x(d.covariates()), y(d.outcomes()), a(d.treatments()), z(d.instruments()), data(d) {}

Eigen::MatrixXd role_features(Role r, const Eigen::VectorXd& z, const Eigen::MatrixXd& x) {
  if (!role_uses_z(r)) return x;
  Eigen::MatrixXd f(x.rows(), x.cols() + 1);
  f.col(0) = z;
  f.rightCols(x.cols()) = x;
  return f;
}

namespace {

Component fit_role(Role r, const TrainingData& t, const Candidate& c, const Eigen::VectorXd& target,
                   std::uint64_t seed) {
  if (!c.learner) {
    if (!c.fixed) throw Error(ErrorCode::InvalidArgument, "candidate has neither learner nor function");
    return Component(role_uses_z(r), c.fixed);
  }
  LearnerKind kind = *c.learner;
  kind.family = role_family(r);
  auto fitted = std::make_shared<const FittedLearner>(fit_learner(kind, role_features(r, t.z, t.x), target, seed));
  return Component(role_uses_z(r), std::move(fitted));
}

}  // namespace

Component fit_pi(const TrainingData& t, const Candidate& c, std::uint64_t seed) {
  return fit_role(Role::pi, t, c, t.z, seed);
}

Component fit_mu(const TrainingData& t, const Candidate& c, std::uint64_t seed) {
  return fit_role(Role::mu, t, c, t.a, seed);
}

std::size_t winsorize(Eigen::VectorXd& v, double lo_q, double hi_q) {
  if (v.size() == 0) return 0;
  std::vector<double> sorted(v.data(), v.data() + v.size());
  const double lo = quantile(sorted, lo_q), hi = quantile(sorted, hi_q);
  std::size_t changed = 0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v(i) < lo) {
      v(i) = lo;
      ++changed;
    } else if (v(i) > hi) {
      v(i) = hi;
      ++changed;
    }
  }
  return changed;
}

DeltaFit fit_delta(const TrainingData& t, const Candidate& c, const Component& pi, const Component& mu,
                   const TrimPolicy& trim, std::uint64_t seed) {
  DeltaFit out;
  if (!c.learner) {
    out.delta = fit_role(Role::delta, t, c, t.y, seed);
    return out;
  }
  const Eigen::Index n = t.x.rows();
  NuisanceValues v;
  v.pi1 = pi(t.z, t.x);
  v.mu0 = mu(Eigen::VectorXd::Zero(n), t.x);
  v.mu1 = mu(Eigen::VectorXd::Ones(n), t.x);
  v.delta = v.tau_obs = v.rho = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd pseudo;
  influence_values(t.data, v, InfluenceKind::phi1, trim, pseudo);
  out.winsorized = winsorize(pseudo);
  out.delta = fit_role(Role::delta, t, c, pseudo, seed);
  return out;
}

Component fit_tau(const TrainingData& t, const Candidate& c, const Component& delta, std::uint64_t seed) {
  if (!c.learner) return fit_role(Role::tau, t, c, t.y, seed);
  const Eigen::VectorXd target = t.y - delta(t.z, t.x).cwiseProduct(t.a);
  return fit_role(Role::tau, t, c, target, seed);
}

Component fit_rho(const TrainingData& t, const Candidate& c, const Component& mu, const Component& delta,
                  std::uint64_t seed) {
  if (!c.learner) return fit_role(Role::rho, t, c, t.y, seed);
  const Eigen::VectorXd am = t.a - mu(t.z, t.x);
  const Eigen::VectorXd target = am.cwiseProduct(t.y - delta(t.z, t.x).cwiseProduct(t.a));
  return fit_role(Role::rho, t, c, target, seed);
}

NuisanceBundle make_bundle(const Component& pi, const Component& mu, const Component& delta, const Component& tau,
                           const Component& rho) {
  NuisanceBundle b;
  b.pi1 = [pi](const Eigen::MatrixXd& x) { return pi(Eigen::VectorXd::Zero(x.rows()), x); };
  b.mu = [mu](const Eigen::VectorXd& z, const Eigen::MatrixXd& x) { return mu(z, x); };
  b.delta = [delta](const Eigen::MatrixXd& x) { return delta(Eigen::VectorXd::Zero(x.rows()), x); };
  b.tau = [tau](const Eigen::VectorXd& z, const Eigen::MatrixXd& x) { return tau(z, x); };
  b.rho = [rho](const Eigen::MatrixXd& x) { return rho(Eigen::VectorXd::Zero(x.rows()), x); };
  return b;
}

NuisanceLearnerSet NuisanceLearnerSet::uniform(LearnerType type) {
  NuisanceLearnerSet s;
  for (Role r : kRoles) s.kinds[static_cast<std::size_t>(r)] = LearnerKind::make(type, role_family(r));
  return s;
}

void NuisanceLearnerSet::validate() const {
  for (Role r : kRoles) {
    const auto& k = kinds[static_cast<std::size_t>(r)];
    k.validate();
    if (k.family != role_family(r))
      throw Error(ErrorCode::InvalidArgument, std::string("wrong learner family for role ") + std::string(to_string(r)));
  }
}

std::uint64_t role_seed(std::uint64_t seed, Role r, std::size_t candidate) {
  return derive_seed(seed, static_cast<std::uint64_t>(r) * 1024 + candidate);
}

FittedBundle fit_nuisance_sequence(const Dataset& train, const std::array<Candidate, 5>& c, const TrimPolicy& trim,
                                   std::uint64_t seed) {
  trim.validate();
  const TrainingData t(train);
  const Component pi = fit_pi(t, c[0], role_seed(seed, Role::pi));
  const Component mu = fit_mu(t, c[1], role_seed(seed, Role::mu));
  const DeltaFit delta = fit_delta(t, c[2], pi, mu, trim, role_seed(seed, Role::delta));
  const Component tau = fit_tau(t, c[3], delta.delta, role_seed(seed, Role::tau));
  const Component rho = fit_rho(t, c[4], mu, delta.delta, role_seed(seed, Role::rho));
  return {make_bundle(pi, mu, delta.delta, tau, rho), delta.winsorized};
}

FittedBundle fit_nuisance_sequence(const Dataset& train, const NuisanceLearnerSet& kinds, const TrimPolicy& trim,
                                   std::uint64_t seed) {
  kinds.validate();
  std::array<Candidate, 5> c;
  for (std::size_t r = 0; r < 5; ++r) c[r] = Candidate::learned(kinds.kinds[r]);
  return fit_nuisance_sequence(train, c, trim, seed);
}

}  // namespace ivmr
