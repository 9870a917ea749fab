#include "ivmr/parametric.hpp"

#include <algorithm>
#include <cmath>

#include "ivmr/error.hpp"

namespace ivmr {

void WorkingModels::validate(std::size_t p) const {
  pi.validate(p);
  mu.validate(p);
  delta.validate(p);
  tau.validate(p);
  rho.validate(p);
}

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd expit_vec(const VectorXd& eta) {
  return eta.unaryExpr([](double e) { return expit(e); });
}

MatrixXd with_leading(const VectorXd& lead, const MatrixXd& rest) {
  MatrixXd out(rest.rows(), rest.cols() + 1);
  out.col(0) = lead;
  out.rightCols(rest.cols()) = rest;
  return out;
}

// Feature matrices and observed columns shared by every moment function.
struct Design {
  Dataset data;
  VectorXd y, a, z;
  MatrixXd fpi, fmu, fdelta, ftau, frho;
  Index n = 0;

  Design(const Dataset& d, const WorkingModels& m) : data(d) {
    if (d.empty()) throw Error(ErrorCode::TooFewObservations, "empty dataset");
    d.require_both_arms();
    m.validate(d.dim());
    const MatrixXd x = d.covariates();
    y = d.outcomes();
    a = d.treatments();
    z = d.instruments();
    n = x.rows();
    fpi = apply_spec(x, m.pi);
    fmu = apply_spec(x, m.mu);
    fdelta = apply_spec(x, m.delta);
    ftau = apply_spec(x, m.tau);
    frho = apply_spec(x, m.rho);
  }

  Index qpi() const { return fpi.cols(); }
  Index qmu() const { return fmu.cols() + 1; }
  Index qdelta() const { return fdelta.cols(); }
  Index qtau() const { return ftau.cols() + 1; }
  Index qrho() const { return frho.cols(); }

  VectorXd pi1(const VectorXd& gamma) const { return expit_vec(fpi * gamma); }
  VectorXd mu_at(const VectorXd& theta, double zval) const {
    return expit_vec((fmu * theta.tail(fmu.cols())).array() + theta(0) * zval);
  }
  VectorXd mu_obs(const VectorXd& theta) const {
    return expit_vec(fmu * theta.tail(fmu.cols()) + theta(0) * z);
  }
  VectorXd delta(const VectorXd& alpha) const { return fdelta * alpha; }
  VectorXd tau_obs(const VectorXd& beta) const { return ftau * beta.tail(ftau.cols()) + beta(0) * z; }
  VectorXd rho(const VectorXd& xi) const { return frho * xi; }

  // 1 / pi(Z|X) with the trim clamp, signed by 2Z-1.
  VectorXd signed_inverse_pi(const VectorXd& gamma, const TrimPolicy& trim) const {
    const VectorXd p1 = pi1(gamma);
    VectorXd w(n);
    for (Index i = 0; i < n; ++i) {
      const double p = std::clamp(p1(i), trim.pi_clamp, 1.0 - trim.pi_clamp);
      w(i) = z(i) != 0.0 ? 1.0 / p : -1.0 / (1.0 - p);
    }
    return w;
  }

  MatrixXd stage1_scores(const VectorXd& gamma, const VectorXd& theta) const {
    MatrixXd s(n, qpi() + qmu());
    const VectorXd rz = z - pi1(gamma);
    const VectorXd ra = a - mu_obs(theta);
    s.leftCols(qpi()) = fpi.array().colwise() * rz.array();
    s.col(qpi()) = z.cwiseProduct(ra);
    s.rightCols(fmu.cols()) = fmu.array().colwise() * ra.array();
    return s;
  }

  NuisanceValues values(const VectorXd& gamma, const VectorXd& theta, const VectorXd& alpha,
                        const VectorXd& beta, const VectorXd& xi) const {
    NuisanceValues v;
    v.pi1 = pi1(gamma);
    v.mu0 = mu_at(theta, 0.0);
    v.mu1 = mu_at(theta, 1.0);
    v.delta = alpha.size() ? delta(alpha) : VectorXd::Zero(n);
    v.tau_obs = beta.size() ? tau_obs(beta) : VectorXd::Zero(n);
    v.rho = xi.size() ? rho(xi) : VectorXd::Zero(n);
    return v;
  }
};

// Splits a stacked vector into consecutive blocks.
struct Cursor {
  const VectorXd& v;
  Index at = 0;
  VectorXd take(Index k) {
    VectorXd out = v.segment(at, k);
    at += k;
    return out;
  }
};

VectorXd concat(std::initializer_list<VectorXd> parts) {
  Index total = 0;
  for (const auto& p : parts) total += p.size();
  VectorXd out(total);
  Index at = 0;
  for (const auto& p : parts) {
    out.segment(at, p.size()) = p;
    at += p.size();
  }
  return out;
}

MatrixXd hconcat(std::initializer_list<MatrixXd> parts) {
  Index rows = 0, cols = 0;
  for (const auto& p : parts) {
    rows = p.rows();
    cols += p.cols();
  }
  MatrixXd out(rows, cols);
  Index at = 0;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p;
    at += p.cols();
  }
  return out;
}

VectorXd column_means(const MatrixXd& m) { return m.colwise().mean().transpose(); }

// Stage-2 contributions (alpha, beta, xi) given stage-1 coefficients.
MatrixXd stage2_contributions(const Design& d, const VectorXd& gamma, const VectorXd& theta, const VectorXd& alpha,
                              const VectorXd& beta, const VectorXd& xi, const TrimPolicy& trim) {
  const VectorXd w = d.signed_inverse_pi(gamma, trim);
  const VectorXd am = d.a - d.mu_obs(theta);
  const VectorXd ya = d.y - d.delta(alpha).cwiseProduct(d.a);
  const VectorXd r = ya - d.tau_obs(beta);
  const VectorXd rh = d.rho(xi);
  const VectorXd g1 = w.cwiseProduct(am.cwiseProduct(r) - rh);
  const VectorXd g3 = am.cwiseProduct(ya) - rh;
  MatrixXd out(d.n, d.qdelta() + d.qtau() + d.qrho());
  out.leftCols(d.qdelta()) = d.fdelta.array().colwise() * g1.array();
  out.col(d.qdelta()) = d.z.cwiseProduct(r);
  out.middleCols(d.qdelta() + 1, d.ftau.cols()) = d.ftau.array().colwise() * r.array();
  out.rightCols(d.qrho()) = d.frho.array().colwise() * g3.array();
  return out;
}

MatrixXd genius_contributions(const Design& d, const VectorXd& gamma, const VectorXd& theta, const VectorXd& alpha,
                              const TrimPolicy& trim) {
  const VectorXd w = d.signed_inverse_pi(gamma, trim);
  const VectorXd g = w.cwiseProduct((d.a - d.mu_obs(theta)).cwiseProduct(d.y - d.delta(alpha).cwiseProduct(d.a)));
  return d.fdelta.array().colwise() * g.array();
}

MatrixXd genius_eff_contributions(const Design& d, const VectorXd& gamma, const VectorXd& theta,
                                  const VectorXd& alpha, const VectorXd& beta, const TrimPolicy& trim) {
  const VectorXd w = d.signed_inverse_pi(gamma, trim);
  const VectorXd r = d.y - d.delta(alpha).cwiseProduct(d.a) - d.tau_obs(beta);
  const VectorXd g1 = w.cwiseProduct((d.a - d.mu_obs(theta)).cwiseProduct(r));
  MatrixXd out(d.n, d.qdelta() + d.qtau());
  out.leftCols(d.qdelta()) = d.fdelta.array().colwise() * g1.array();
  out.col(d.qdelta()) = d.z.cwiseProduct(r);
  out.rightCols(d.ftau.cols()) = d.ftau.array().colwise() * r.array();
  return out;
}

// OLS of Y on (A * delta-features, Z, tau-features): starting values for (alpha, beta).
std::pair<VectorXd, VectorXd> outcome_regression_start(const Design& d) {
  MatrixXd design = hconcat({MatrixXd(d.fdelta.array().colwise() * d.a.array()), MatrixXd(d.z), d.ftau});
  try {
    const VectorXd c = fit_ols(design, d.y).coefficients;
    return {c.head(d.qdelta()), c.tail(d.qtau())};
  } catch (const Error&) {
    return {VectorXd::Zero(d.qdelta()), VectorXd::Zero(d.qtau())};
  }
}

// Solves the mean moment with perturbed restarts on failure.
FitResult solve_with_restarts(const VectorFn& g, const VectorXd& init, const ParametricConfig& cfg, int& restarts) {
  restarts = 0;
  try {
    return solve_moment_system(g, init, cfg.solver);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoConvergence && e.code() != ErrorCode::SingularJacobian &&
        e.code() != ErrorCode::NonFiniteEvaluation)
      throw;
    for (int k = 0; k < cfg.restarts; ++k) {
      Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(k)));
      VectorXd start = init;
      for (Index j = 0; j < start.size(); ++j) start(j) += 0.1 * (1.0 + std::abs(init(j))) * rng.normal();
      ++restarts;
      try {
        return solve_moment_system(g, start, cfg.solver);
      } catch (const Error&) {
      }
    }
    throw;
  }
}

double mean_of(const VectorXd& v) {
  CompensatedSum s;
  for (Index i = 0; i < v.size(); ++i) s.add(v(i));
  return s.value() / static_cast<double>(v.size());
}

void add_stage1_diagnostics(Diagnostics& diag, const Stage1Fit& s1) {
  diag.separation_detected = s1.pi_fit.separation_detected || s1.mu_fit.separation_detected;
  diag.converged = s1.pi_fit.converged && s1.mu_fit.converged;
  diag.solver_iterations = s1.pi_fit.iterations + s1.mu_fit.iterations;
  if (diag.separation_detected) diag.notes.push_back("separation detected in a stage-1 logistic fit");
}

double se_from(const MatrixXd& v, Index k) { return std::sqrt(std::max(0.0, v(k, k))); }

}  // namespace

Stage1Fit fit_stage1(const Dataset& data, const WorkingModels& models, const SolverConfig& solver) {
  const Design d(data, models);
  Stage1Fit s;
  s.pi_fit = fit_logistic(d.fpi, d.z, solver);
  s.mu_fit = fit_logistic(with_leading(d.z, d.fmu), d.a, solver);
  s.gamma = s.pi_fit.coefficients;
  s.theta = s.mu_fit.coefficients;
  return s;
}

namespace {

Stage2Fit fit_stage2_design(const Design& d, const Stage1Fit& s1, const ParametricConfig& config) {
  const Index qa = d.qdelta(), qb = d.qtau(), qx = d.qrho();
  if (d.n < qa + qb + qx)
    throw Error(ErrorCode::RankDeficient, "fewer observations than stage-2 parameters");
  auto g = [&](const VectorXd& p) {
    Cursor c{p};
    const VectorXd alpha = c.take(qa), beta = c.take(qb), xi = c.take(qx);
    return column_means(stage2_contributions(d, s1.gamma, s1.theta, alpha, beta, xi, config.trim));
  };
  const auto [alpha0, beta0] = outcome_regression_start(d);
  const VectorXd init = concat({alpha0, beta0, VectorXd::Zero(qx)});
  Stage2Fit out;
  out.solve = solve_with_restarts(g, init, config, out.restarts);
  Cursor c{out.solve.coefficients};
  out.alpha = c.take(qa);
  out.beta = c.take(qb);
  out.xi = c.take(qx);
  return out;
}

}  // namespace

Stage2Fit fit_stage2(const Dataset& data, const WorkingModels& models, const Stage1Fit& stage1,
                     const ParametricConfig& config) {
  config.trim.validate();
  return fit_stage2_design(Design(data, models), stage1, config);
}

NuisanceBundle parametric_bundle(const WorkingModels& models, const VectorXd& gamma, const VectorXd& theta,
                                 const VectorXd& alpha, const VectorXd& beta, const VectorXd& xi) {
  NuisanceBundle b;
  b.pi1 = [spec = models.pi, gamma](const MatrixXd& x) { return expit_vec(apply_spec(x, spec) * gamma); };
  b.mu = [spec = models.mu, theta](const VectorXd& z, const MatrixXd& x) {
    return expit_vec(apply_spec(x, spec) * theta.tail(theta.size() - 1) + theta(0) * z);
  };
  b.delta = [spec = models.delta, alpha](const MatrixXd& x) {
    return alpha.size() ? VectorXd(apply_spec(x, spec) * alpha) : VectorXd::Zero(x.rows());
  };
  b.tau = [spec = models.tau, beta](const VectorXd& z, const MatrixXd& x) {
    return beta.size() ? VectorXd(apply_spec(x, spec) * beta.tail(beta.size() - 1) + beta(0) * z)
                       : VectorXd::Zero(x.rows());
  };
  b.rho = [spec = models.rho, xi](const MatrixXd& x) {
    return xi.size() ? VectorXd(apply_spec(x, spec) * xi) : VectorXd::Zero(x.rows());
  };
  return b;
}

EstimateReport estimate_mr(const Dataset& data, const WorkingModels& models, const ParametricConfig& config) {
  config.trim.validate();
  const Design d(data, models);
  Stage1Fit s1;
  s1.pi_fit = fit_logistic(d.fpi, d.z, config.solver);
  s1.mu_fit = fit_logistic(with_leading(d.z, d.fmu), d.a, config.solver);
  s1.gamma = s1.pi_fit.coefficients;
  s1.theta = s1.mu_fit.coefficients;
  const Stage2Fit s2 = fit_stage2_design(d, s1, config);

  VectorXd phi;
  const auto trim_counts =
      influence_values(d.data, d.values(s1.gamma, s1.theta, s2.alpha, s2.beta, s2.xi), InfluenceKind::phi_eff,
                       config.trim, phi);
  const double delta_hat = mean_of(phi);

  const Index qg = d.qpi(), qt = d.qmu(), qa = d.qdelta(), qb = d.qtau(), qx = d.qrho();
  MomentContributions stack = [&](const VectorXd& psi) {
    Cursor c{psi};
    const VectorXd gamma = c.take(qg), theta = c.take(qt), alpha = c.take(qa), beta = c.take(qb), xi = c.take(qx);
    const double delta = psi(psi.size() - 1);
    VectorXd f;
    influence_values(d.data, d.values(gamma, theta, alpha, beta, xi), InfluenceKind::phi_eff, config.trim, f);
    return hconcat({d.stage1_scores(gamma, theta),
                    stage2_contributions(d, gamma, theta, alpha, beta, xi, config.trim),
                    MatrixXd(f.array() - delta)});
  };
  const VectorXd psi = concat({s1.gamma, s1.theta, s2.alpha, s2.beta, s2.xi, VectorXd::Constant(1, delta_hat)});
  const MatrixXd v = sandwich_variance(stack, psi, config.solver.jacobian_step);

  auto r = EstimateReport::make(EstimatorId::mr, delta_hat, se_from(v, psi.size() - 1));
  add_stage1_diagnostics(r.diagnostics, s1);
  r.diagnostics.solver_iterations += s2.solve.iterations;
  r.diagnostics.solver_restarts = s2.restarts;
  r.diagnostics.trim = trim_counts;
  const Index bz = qg + qt + qa;
  r.aux = AuxCoefficient{"beta_z", s2.beta(0), se_from(v, bz)};
  return r;
}

EstimateReport estimate_delta1(const Dataset& data, const WorkingModels& models, const ParametricConfig& config) {
  config.trim.validate();
  const Design d(data, models);
  Stage1Fit s1;
  s1.pi_fit = fit_logistic(d.fpi, d.z, config.solver);
  s1.mu_fit = fit_logistic(with_leading(d.z, d.fmu), d.a, config.solver);
  s1.gamma = s1.pi_fit.coefficients;
  s1.theta = s1.mu_fit.coefficients;
  const VectorXd none;

  VectorXd phi;
  const auto trim_counts =
      influence_values(d.data, d.values(s1.gamma, s1.theta, none, none, none), InfluenceKind::phi1, config.trim, phi);
  const double delta_hat = mean_of(phi);

  const Index qg = d.qpi(), qt = d.qmu();
  MomentContributions stack = [&](const VectorXd& psi) {
    Cursor c{psi};
    const VectorXd gamma = c.take(qg), theta = c.take(qt);
    VectorXd f;
    influence_values(d.data, d.values(gamma, theta, none, none, none), InfluenceKind::phi1, config.trim, f);
    return hconcat({d.stage1_scores(gamma, theta), MatrixXd(f.array() - psi(psi.size() - 1))});
  };
  const VectorXd psi = concat({s1.gamma, s1.theta, VectorXd::Constant(1, delta_hat)});
  const MatrixXd v = sandwich_variance(stack, psi, config.solver.jacobian_step);

  auto r = EstimateReport::make(EstimatorId::delta1, delta_hat, se_from(v, psi.size() - 1));
  add_stage1_diagnostics(r.diagnostics, s1);
  r.diagnostics.trim = trim_counts;
  return r;
}

EstimateReport estimate_genius(const Dataset& data, const WorkingModels& models, const ParametricConfig& config) {
  config.trim.validate();
  const Design d(data, models);
  Stage1Fit s1;
  s1.pi_fit = fit_logistic(d.fpi, d.z, config.solver);
  s1.mu_fit = fit_logistic(with_leading(d.z, d.fmu), d.a, config.solver);
  s1.gamma = s1.pi_fit.coefficients;
  s1.theta = s1.mu_fit.coefficients;
  const Index qg = d.qpi(), qt = d.qmu(), qa = d.qdelta();

  auto g = [&](const VectorXd& alpha) {
    return column_means(genius_contributions(d, s1.gamma, s1.theta, alpha, config.trim));
  };
  int restarts = 0;
  const FitResult sol = solve_with_restarts(g, outcome_regression_start(d).first, config, restarts);
  const VectorXd alpha = sol.coefficients;
  const double delta_hat = mean_of(d.delta(alpha));

  MomentContributions stack = [&](const VectorXd& psi) {
    Cursor c{psi};
    const VectorXd gamma = c.take(qg), theta = c.take(qt), a = c.take(qa);
    return hconcat({d.stage1_scores(gamma, theta), genius_contributions(d, gamma, theta, a, config.trim),
                    MatrixXd(d.delta(a).array() - psi(psi.size() - 1))});
  };
  const VectorXd psi = concat({s1.gamma, s1.theta, alpha, VectorXd::Constant(1, delta_hat)});
  const MatrixXd v = sandwich_variance(stack, psi, config.solver.jacobian_step);

  auto r = EstimateReport::make(EstimatorId::genius, delta_hat, se_from(v, psi.size() - 1));
  add_stage1_diagnostics(r.diagnostics, s1);
  r.diagnostics.solver_iterations += sol.iterations;
  r.diagnostics.solver_restarts = restarts;
  return r;
}

EstimateReport estimate_genius_eff(const Dataset& data, const WorkingModels& models,
                                   const ParametricConfig& config) {
  config.trim.validate();
  const Design d(data, models);
  Stage1Fit s1;
  s1.pi_fit = fit_logistic(d.fpi, d.z, config.solver);
  s1.mu_fit = fit_logistic(with_leading(d.z, d.fmu), d.a, config.solver);
  s1.gamma = s1.pi_fit.coefficients;
  s1.theta = s1.mu_fit.coefficients;
  const Index qg = d.qpi(), qt = d.qmu(), qa = d.qdelta(), qb = d.qtau();

  auto g = [&](const VectorXd& p) {
    Cursor c{p};
    const VectorXd alpha = c.take(qa), beta = c.take(qb);
    return column_means(genius_eff_contributions(d, s1.gamma, s1.theta, alpha, beta, config.trim));
  };
  const auto [alpha0, beta0] = outcome_regression_start(d);
  int restarts = 0;
  const FitResult sol = solve_with_restarts(g, concat({alpha0, beta0}), config, restarts);
  Cursor sc{sol.coefficients};
  const VectorXd alpha = sc.take(qa), beta = sc.take(qb);
  const double delta_hat = mean_of(d.delta(alpha));

  MomentContributions stack = [&](const VectorXd& psi) {
    Cursor c{psi};
    const VectorXd gamma = c.take(qg), theta = c.take(qt), a = c.take(qa), b = c.take(qb);
    return hconcat({d.stage1_scores(gamma, theta), genius_eff_contributions(d, gamma, theta, a, b, config.trim),
                    MatrixXd(d.delta(a).array() - psi(psi.size() - 1))});
  };
  const VectorXd psi = concat({s1.gamma, s1.theta, alpha, beta, VectorXd::Constant(1, delta_hat)});
  const MatrixXd v = sandwich_variance(stack, psi, config.solver.jacobian_step);

  auto r = EstimateReport::make(EstimatorId::genius_eff, delta_hat, se_from(v, psi.size() - 1));
  add_stage1_diagnostics(r.diagnostics, s1);
  r.diagnostics.solver_iterations += sol.iterations;
  r.diagnostics.solver_restarts = restarts;
  r.aux = AuxCoefficient{"beta_z", beta(0), se_from(v, qg + qt + qa)};
  return r;
}

BenchmarkModels BenchmarkModels::defaults(std::size_t p) {
  BenchmarkModels m;
  m.covariates.columns.push_back(CovariateColumn::intercept());
  for (std::size_t j = 0; j < p; ++j) m.covariates.columns.push_back(CovariateColumn::raw(j));
  m.delta.columns.push_back(CovariateColumn::intercept());
  return m;
}

std::pair<EstimateReport, EstimateReport> estimate_benchmarks(const Dataset& data, const BenchmarkModels& models,
                                                              const ParametricConfig& config) {
  if (data.empty()) throw Error(ErrorCode::TooFewObservations, "empty dataset");
  data.require_both_arms();
  models.covariates.validate(data.dim());
  models.delta.validate(data.dim());
  const MatrixXd x = data.covariates();
  const VectorXd y = data.outcomes(), a = data.treatments(), z = data.instruments();
  const MatrixXd f = apply_spec(x, models.covariates);
  const MatrixXd fd = apply_spec(x, models.delta);

  // ols: Y on (A, features), report the A coefficient.
  const MatrixXd dols = with_leading(a, f);
  const VectorXd cols = fit_ols(dols, y).coefficients;
  MomentContributions ols_stack = [&](const VectorXd& psi) {
    const VectorXd r = y - dols * psi;
    return MatrixXd(dols.array().colwise() * r.array());
  };
  const MatrixXd vols = sandwich_variance(ols_stack, cols, config.solver.jacobian_step);
  auto ols = EstimateReport::make(EstimatorId::ols, cols(0), se_from(vols, 0));

  // tsiv: mu(Z,X) by logistic regression, then Y on (mu * delta-features, features).
  const MatrixXd fmu = with_leading(z, f);
  const FitResult mu_fit = fit_logistic(fmu, a, config.solver);
  auto second_design = [&](const VectorXd& theta) {
    const VectorXd m = expit_vec(fmu * theta);
    return hconcat({MatrixXd(fd.array().colwise() * m.array()), f});
  };
  const MatrixXd d2 = second_design(mu_fit.coefficients);
  const VectorXd c2 = fit_ols(d2, y).coefficients;
  const Index qt = fmu.cols(), qa = fd.cols(), q2 = d2.cols();
  const double tsiv_hat = mean_of(fd * c2.head(qa));
  MomentContributions tsiv_stack = [&](const VectorXd& psi) {
    Cursor c{psi};
    const VectorXd theta = c.take(qt), coef = c.take(q2);
    const VectorXd ra = a - expit_vec(fmu * theta);
    const MatrixXd dd = second_design(theta);
    const VectorXd r = y - dd * coef;
    return hconcat({MatrixXd(fmu.array().colwise() * ra.array()), MatrixXd(dd.array().colwise() * r.array()),
                    MatrixXd((fd * coef.head(qa)).array() - psi(psi.size() - 1))});
  };
  const VectorXd psi = concat({mu_fit.coefficients, c2, VectorXd::Constant(1, tsiv_hat)});
  const MatrixXd vt = sandwich_variance(tsiv_stack, psi, config.solver.jacobian_step);
  auto tsiv = EstimateReport::make(EstimatorId::tsiv, tsiv_hat, se_from(vt, psi.size() - 1));
  tsiv.diagnostics.solver_iterations = mu_fit.iterations;
  tsiv.diagnostics.converged = mu_fit.converged;
  tsiv.diagnostics.separation_detected = mu_fit.separation_detected;
  return {ols, tsiv};
}

MatrixXd sandwich_variance(const MomentContributions& g, const VectorXd& psi_hat, double step) {
  const MatrixXd contrib = g(psi_hat);
  const Index n = contrib.rows(), m = contrib.cols();
  if (m != psi_hat.size()) throw Error(ErrorCode::InvalidArgument, "stacked moments are not just-identified");
  if (n < 1) throw Error(ErrorCode::TooFewObservations, "no moment contributions");
  const MatrixXd jac = numeric_jacobian([&](const VectorXd& p) { return column_means(g(p)); }, psi_hat, step);
  const MatrixXd meat = contrib.transpose() * contrib / static_cast<double>(n);
  Eigen::FullPivLU<MatrixXd> lu(jac);
  if (!lu.isInvertible() || lu.rcond() < 1e-14)
    throw Error(ErrorCode::SingularJacobian, "moment Jacobian is singular");
  const MatrixXd jinv = lu.inverse();
  MatrixXd v = jinv * meat * jinv.transpose() / static_cast<double>(n);
  return 0.5 * (v + v.transpose());
}

}  // namespace ivmr
