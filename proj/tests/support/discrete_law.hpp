#pragma once

// Finite-support law for exact checks: X, Z, A binary and Y two-point.
// All truths are derived from the cell probabilities below, never from the
// library.

#include <array>
#include <functional>
#include <vector>

#include "ivmr/data.hpp"
#include "ivmr/influence.hpp"

namespace oracle {

struct DiscreteLaw {
  double px1 = 0.4;
  std::array<double, 2> pi1{0.35, 0.6};                 // P(Z=1|x)
  std::array<std::array<double, 2>, 2> mu{{{0.3, 0.55},  // P(A=1|z,x), [x][z]
                                           {0.2, 0.7}}};
  static constexpr double y_lo = -1.0;
  static constexpr double y_hi = 2.0;

  double q(int a, int z, int x) const {  // P(Y=y_hi | a, z, x)
    return 0.2 + 0.15 * a + 0.1 * z + 0.2 * x + 0.12 * a * z - 0.07 * a * x + 0.05 * z * x;
  }
  double px(int x) const { return x ? px1 : 1.0 - px1; }
  double pz(int z, int x) const { return z ? pi1[x] : 1.0 - pi1[x]; }
  double pa(int a, int z, int x) const { return a ? mu[x][z] : 1.0 - mu[x][z]; }
  double py(double y, int a, int z, int x) const { return y == y_hi ? q(a, z, x) : 1.0 - q(a, z, x); }

  double ey(int a, int z, int x) const { return y_lo + (y_hi - y_lo) * q(a, z, x); }
  double var_a(int z, int x) const { return mu[x][z] * (1.0 - mu[x][z]); }
  double cov_ay(int z, int x) const { return var_a(z, x) * (ey(1, z, x) - ey(0, z, x)); }

  double delta(int x) const { return (cov_ay(1, x) - cov_ay(0, x)) / (var_a(1, x) - var_a(0, x)); }
  double tau(int z, int x) const {
    const double eyz = mu[x][z] * ey(1, z, x) + (1.0 - mu[x][z]) * ey(0, z, x);
    return eyz - delta(x) * mu[x][z];
  }
  // cov(A, Y - delta A | z, x); the same for both z by construction of delta.
  double rho(int x) const { return cov_ay(0, x) - delta(x) * var_a(0, x); }
  double ate() const { return px(0) * delta(0) + px(1) * delta(1); }

  ivmr::NuisancePoint truth(int x) const {
    ivmr::NuisancePoint v;
    v.pi1 = pi1[x];
    v.mu0 = mu[x][0];
    v.mu1 = mu[x][1];
    v.delta = delta(x);
    v.tau0 = tau(0, x);
    v.tau1 = tau(1, x);
    v.rho = rho(x);
    return v;
  }

  using Fn = std::function<double(const ivmr::Observation&)>;

  double expect_given_zx(int z, int x, const Fn& f) const {
    double s = 0.0;
    for (int a = 0; a <= 1; ++a)
      for (double y : {y_lo, y_hi}) s += pa(a, z, x) * py(y, a, z, x) * f(ivmr::Observation{y, a, z, {double(x)}});
    return s;
  }
  double expect_given_x(int x, const Fn& f) const {
    return pz(0, x) * expect_given_zx(0, x, f) + pz(1, x) * expect_given_zx(1, x, f);
  }
  double expect(const Fn& f) const { return px(0) * expect_given_x(0, f) + px(1) * expect_given_x(1, f); }
};

/// Reference efficient influence function, written out directly.
inline double phi_eff_ref(const ivmr::Observation& o, const ivmr::NuisancePoint& v) {
  const double s = 2.0 * o.z - 1.0;
  const double pz = o.z ? v.pi1 : 1.0 - v.pi1;
  const double muz = o.z ? v.mu1 : v.mu0;
  const double tauz = o.z ? v.tau1 : v.tau0;
  const double d = v.mu1 * (1.0 - v.mu1) - v.mu0 * (1.0 - v.mu0);
  return s * ((o.a - muz) * (o.y - v.delta * o.a - tauz) - v.rho) / (pz * d) + v.delta;
}

/// Nuisances chosen away from the truth, one perturbation per field.
inline ivmr::NuisancePoint perturbed(const DiscreteLaw& law, int x) {
  ivmr::NuisancePoint v = law.truth(x);
  v.pi1 += x ? -0.12 : 0.1;
  v.mu0 += x ? 0.06 : -0.05;
  v.mu1 += x ? -0.04 : 0.07;
  v.delta += x ? -0.9 : 0.7;
  v.tau0 += -0.5;
  v.tau1 += 0.35 + 0.2 * x;
  v.rho += x ? 0.15 : -0.25;
  return v;
}

/// Truth for the roles flagged in `correct` (pi, mu, delta, tau, rho), perturbed elsewhere.
inline ivmr::NuisancePoint mixed(const DiscreteLaw& law, int x, const std::array<bool, 5>& correct) {
  const ivmr::NuisancePoint t = law.truth(x), w = perturbed(law, x);
  ivmr::NuisancePoint v = w;
  if (correct[0]) v.pi1 = t.pi1;
  if (correct[1]) v.mu0 = t.mu0, v.mu1 = t.mu1;
  if (correct[2]) v.delta = t.delta;
  if (correct[3]) v.tau0 = t.tau0, v.tau1 = t.tau1;
  if (correct[4]) v.rho = t.rho;
  return v;
}

/// Bundle form of mixed(); x is the single 0/1 covariate column.
inline ivmr::NuisanceBundle bundle_of(const DiscreteLaw& law, const std::array<bool, 5>& correct) {
  auto at = [law, correct](double x) { return mixed(law, x > 0.5 ? 1 : 0, correct); };
  ivmr::NuisanceBundle b;
  b.pi1 = [at](const Eigen::MatrixXd& x) {
    Eigen::VectorXd r(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) r(i) = at(x(i, 0)).pi1;
    return r;
  };
  b.mu = [at](const Eigen::VectorXd& z, const Eigen::MatrixXd& x) {
    Eigen::VectorXd r(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) r(i) = at(x(i, 0)).mu(z(i) > 0.5);
    return r;
  };
  b.delta = [at](const Eigen::MatrixXd& x) {
    Eigen::VectorXd r(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) r(i) = at(x(i, 0)).delta;
    return r;
  };
  b.tau = [at](const Eigen::VectorXd& z, const Eigen::MatrixXd& x) {
    Eigen::VectorXd r(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) r(i) = at(x(i, 0)).tau(z(i) > 0.5);
    return r;
  };
  b.rho = [at](const Eigen::MatrixXd& x) {
    Eigen::VectorXd r(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) r(i) = at(x(i, 0)).rho;
    return r;
  };
  return b;
}

/// Every cell of the law's support as one row each (y, a, z, x).
inline std::vector<std::vector<double>> support_rows() {
  std::vector<std::vector<double>> rows;
  for (int x = 0; x <= 1; ++x)
    for (int z = 0; z <= 1; ++z)
      for (int a = 0; a <= 1; ++a)
        for (double y : {DiscreteLaw::y_lo, DiscreteLaw::y_hi}) rows.push_back({y, double(a), double(z), double(x)});
  return rows;
}

}  // namespace oracle
