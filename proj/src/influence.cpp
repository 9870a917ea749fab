#include "ivmr/influence.hpp"

#include "ivmr/error.hpp"
#include "ivmr/numerics.hpp"

namespace ivmr {

void TrimPolicy::validate() const {
  if (!(pi_clamp > 0.0 && pi_clamp < 0.5))
    throw Error(ErrorCode::InvalidArgument, "pi_clamp must lie in (0, 0.5)");
  if (!(denom_floor > 0.0)) throw Error(ErrorCode::InvalidArgument, "denom_floor must be positive");
}

namespace {

Eigen::VectorXd checked(Eigen::VectorXd v, Eigen::Index n, const char* what) {
  if (v.size() != n) throw Error(ErrorCode::InvalidArgument, std::string(what) + " returned wrong length");
  return v;
}

}  // namespace

NuisanceValues evaluate_bundle(const NuisanceBundle& b, const Eigen::MatrixXd& x, const Eigen::VectorXd& z) {
  const Eigen::Index n = x.rows();
  const Eigen::VectorXd zeros = Eigen::VectorXd::Zero(n), ones = Eigen::VectorXd::Ones(n);
  NuisanceValues v;
  v.pi1 = checked(b.pi1(x), n, "pi");
  v.mu0 = checked(b.mu(zeros, x), n, "mu");
  v.mu1 = checked(b.mu(ones, x), n, "mu");
  v.delta = checked(b.delta(x), n, "delta");
  v.tau_obs = checked(b.tau(z, x), n, "tau");
  v.rho = checked(b.rho(x), n, "rho");
  return v;
}

NuisanceValues evaluate_bundle(const NuisanceBundle& bundle, const Dataset& data) {
  return evaluate_bundle(bundle, data.covariates(), data.instruments());
}

NuisancePoint evaluate_point(const NuisanceBundle& b, const std::vector<double>& x) {
  Eigen::MatrixXd row(1, static_cast<Eigen::Index>(x.size()));
  for (std::size_t j = 0; j < x.size(); ++j) row(0, static_cast<Eigen::Index>(j)) = x[j];
  const Eigen::VectorXd z0 = Eigen::VectorXd::Zero(1), z1 = Eigen::VectorXd::Ones(1);
  NuisancePoint p;
  p.pi1 = b.pi1(row)(0);
  p.mu0 = b.mu(z0, row)(0);
  p.mu1 = b.mu(z1, row)(0);
  p.delta = b.delta(row)(0);
  p.tau0 = b.tau(z0, row)(0);
  p.tau1 = b.tau(z1, row)(0);
  p.rho = b.rho(row)(0);
  return p;
}

double sigma2(double mu) { return mu * (1.0 - mu); }

double sigma2(int z, const NuisancePoint& v) { return sigma2(v.mu(z)); }

namespace {

double clamp_pi(double p1, const TrimPolicy& trim, kernels::TrimCounts* counts) {
  if (p1 < trim.pi_clamp || p1 > 1.0 - trim.pi_clamp) {
    if (counts) ++counts->pi_clamped;
    return p1 < trim.pi_clamp ? trim.pi_clamp : 1.0 - trim.pi_clamp;
  }
  return p1;
}

double eff_point(const Observation& o, double delta, double tau_z, double rho, const NuisancePoint& v,
                 const TrimPolicy& trim, kernels::TrimCounts* counts) {
  const double y = o.y, a = o.a, z = o.z, pi1 = v.pi1, mu0 = v.mu0, mu1 = v.mu1;
  kernels::PhiInputs in{&y, &a, &z, &pi1, &mu0, &mu1, &delta, &tau_z, &rho, 1};
  double out = 0.0;
  const auto c = kernels::scalar::phi_eff(in, trim.thresholds(), &out);
  if (counts) *counts += c;
  return out;
}

}  // namespace

double phi1(const Observation& o, const NuisancePoint& v, const TrimPolicy& trim, kernels::TrimCounts* counts) {
  return eff_point(o, 0.0, 0.0, 0.0, v, trim, counts);
}

double phi2(const Observation& o, const NuisancePoint& v, const TrimPolicy& trim, kernels::TrimCounts* counts) {
  const double p1 = clamp_pi(v.pi1, trim, counts);
  const double pz = o.z ? p1 : 1.0 - p1;
  const double sgn = o.z ? 1.0 : -1.0;
  return sgn * o.a * (o.y - v.delta * o.a - v.tau(o.z)) / pz;
}

double phi3(const Observation& o, const NuisancePoint& v) {
  return (o.a - v.mu(o.z)) * (o.y - v.delta * o.a) - v.rho;
}

double phi_eff(const Observation& o, const NuisancePoint& v, const TrimPolicy& trim, kernels::TrimCounts* counts) {
  return eff_point(o, v.delta, v.tau(o.z), v.rho, v, trim, counts);
}

double phi1(const Observation& o, const NuisanceBundle& b, const TrimPolicy& trim) {
  return phi1(o, evaluate_point(b, o.x), trim);
}
double phi2(const Observation& o, const NuisanceBundle& b, const TrimPolicy& trim) {
  return phi2(o, evaluate_point(b, o.x), trim);
}
double phi3(const Observation& o, const NuisanceBundle& b) { return phi3(o, evaluate_point(b, o.x)); }
double phi_eff(const Observation& o, const NuisanceBundle& b, const TrimPolicy& trim) {
  return phi_eff(o, evaluate_point(b, o.x), trim);
}

kernels::TrimCounts influence_values(const Dataset& data, const NuisanceValues& v, InfluenceKind which,
                                     const TrimPolicy& trim, Eigen::VectorXd& out) {
  trim.validate();
  const std::size_t n = data.size();
  if (v.size() != n) throw Error(ErrorCode::InvalidArgument, "nuisance values do not match dataset");
  const Eigen::VectorXd y = data.outcomes(), a = data.treatments(), z = data.instruments();
  out.resize(static_cast<Eigen::Index>(n));
  kernels::PhiInputs in{y.data(), a.data(), z.data(), v.pi1.data(), v.mu0.data(), v.mu1.data(),
                        v.delta.data(), v.tau_obs.data(), v.rho.data(), n};
  Eigen::VectorXd zeros;
  if (which == InfluenceKind::phi1) {
    zeros = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    in.delta = in.tau = in.rho = zeros.data();
  }
  return kernels::phi_eff(in, trim.thresholds(), out.data());
}

PluginResult plugin_average(const Dataset& data, const NuisanceBundle& bundle, InfluenceKind which,
                            const TrimPolicy& trim) {
  if (data.empty()) throw Error(ErrorCode::TooFewObservations, "empty dataset");
  PluginResult r;
  r.trim = influence_values(data, evaluate_bundle(bundle, data), which, trim, r.contributions);
  CompensatedSum s;
  for (Eigen::Index i = 0; i < r.contributions.size(); ++i) s.add(r.contributions(i));
  r.value = s.value() / static_cast<double>(r.contributions.size());
  return r;
}

}  // namespace ivmr
