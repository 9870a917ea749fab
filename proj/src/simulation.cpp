#include "ivmr/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "ivmr/dml.hpp"
#include "ivmr/error.hpp"
#include "ivmr/numerics.hpp"
#include "ivmr/sml.hpp"

namespace ivmr {

namespace {

struct Star {
  double s[kSimDim];
  explicit Star(std::span<const double> x) {
    for (std::size_t j = 0; j < kSimDim; ++j) s[j] = logistic_bump(x[j]);
  }
};

double u_sd(const Star& x) {
  return std::sqrt(0.25 + 0.5 * x.s[0] + 0.15 * x.s[1] - 0.1 * x.s[2] - 0.1 * x.s[3] + 0.1 * x.s[4]);
}

double pi_index(const Star& x) {
  return 0.8 + x.s[0] - 0.2 * x.s[1] - 0.2 * x.s[2] - 0.2 * x.s[3] + 0.1 * x.s[4];
}

double mu_index(int z, const Star& x) {
  return -2.0 + 1.5 * z + 0.6 * x.s[0] - 0.2 * x.s[1] - 0.2 * x.s[2] - 0.1 * x.s[3] + 0.1 * x.s[4];
}

double delta_of(const Star& x) { return 2.0 * x.s[0] + 0.5 * x.s[1] + 0.5 * x.s[2]; }

double tau_of(int z, const Star& x) {
  return -2.0 + 2.0 * x.s[0] + 0.5 * x.s[1] + 0.2 * x.s[2] + 0.1 * x.s[3] + 0.1 * x.s[4] - 2.0 * z;
}

void check_dim(std::span<const double> x) {
  if (x.size() < kSimDim) throw Error(ErrorCode::IndexOutOfRange, "simulation nuisances need 5 covariates");
}

template <class F>
CovariateFn rowwise(F f) {
  return [f](const Eigen::MatrixXd& x) {
    Eigen::VectorXd out(x.rows());
    std::vector<double> row(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) row[static_cast<std::size_t>(j)] = x(i, j);
      out(i) = f(std::span<const double>(row));
    }
    return out;
  };
}

template <class F>
InstrumentCovariateFn rowwise_z(F f) {
  return [f](const Eigen::VectorXd& z, const Eigen::MatrixXd& x) {
    Eigen::VectorXd out(x.rows());
    std::vector<double> row(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) row[static_cast<std::size_t>(j)] = x(i, j);
      out(i) = f(z(i) > 0.5 ? 1 : 0, std::span<const double>(row));
    }
    return out;
  };
}

}  // namespace

SimulatedData generate_dataset(std::size_t n, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "n must be at least 1");
  Rng rng(seed);
  std::vector<double> y(n);
  std::vector<int> a(n), z(n);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(kSimDim));
  SimulatedData out;
  out.u.resize(static_cast<Eigen::Index>(n));
  double xr[kSimDim];
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < kSimDim; ++j) {
      xr[j] = rng.uniform();
      x(ii, static_cast<Eigen::Index>(j)) = xr[j];
    }
    const Star s(std::span<const double>(xr, kSimDim));
    const double u = sample_truncated_normal(0.0, u_sd(s), -0.5, 0.5, rng);
    z[i] = rng.bernoulli(expit(pi_index(s))) ? 1 : 0;
    double pa = expit(mu_index(z[i], s)) + 0.1 * u;
    if (pa < 0.0 || pa > 1.0) {
      ++out.clamped;
      pa = std::clamp(pa, 0.0, 1.0);
    }
    a[i] = rng.bernoulli(pa) ? 1 : 0;
    y[i] = tau_of(z[i], s) + delta_of(s) * a[i] + u + rng.normal();
    out.u(ii) = u;
  }
  out.data = Dataset::from_columns(std::move(y), std::move(a), std::move(z), std::move(x));
  return out;
}

double true_pi1(std::span<const double> x) {
  check_dim(x);
  return expit(pi_index(Star(x)));
}

// The confounder has mean zero given X, so it drops out of mu and tau.
double true_mu(int z, std::span<const double> x) {
  check_dim(x);
  return expit(mu_index(z, Star(x)));
}

double true_delta(std::span<const double> x) {
  check_dim(x);
  return delta_of(Star(x));
}

double true_tau(int z, std::span<const double> x) {
  check_dim(x);
  return tau_of(z, Star(x));
}

// E[(A - mu)(Y - delta A) | X] = 0.1 Var(U | X).
double true_rho(std::span<const double> x) {
  check_dim(x);
  return 0.1 * truncated_normal_variance(u_sd(Star(x)), 0.5);
}

NuisanceBundle truth_bundle() {
  NuisanceBundle b;
  b.pi1 = rowwise(true_pi1);
  b.mu = rowwise_z(true_mu);
  b.delta = rowwise(true_delta);
  b.tau = rowwise_z(true_tau);
  b.rho = rowwise(true_rho);
  return b;
}

std::string_view to_string(ScenarioId s) {
  switch (s) {
    case ScenarioId::S0: return "S0";
    case ScenarioId::S1: return "S1";
    case ScenarioId::S2: return "S2";
    case ScenarioId::S3: return "S3";
  }
  return "?";
}

ScenarioId parse_scenario(std::string_view name) {
  if (name == "S0" || name == "s0" || name == "0") return ScenarioId::S0;
  if (name == "S1" || name == "s1" || name == "1") return ScenarioId::S1;
  if (name == "S2" || name == "s2" || name == "2") return ScenarioId::S2;
  if (name == "S3" || name == "s3" || name == "3") return ScenarioId::S3;
  throw Error(ErrorCode::InvalidArgument, "unknown scenario '" + std::string(name) + "'");
}

std::array<bool, 5> scenario_correctness(ScenarioId s) {
  switch (s) {
    case ScenarioId::S0: return {true, true, true, true, true};
    case ScenarioId::S1: return {true, true, false, false, false};
    case ScenarioId::S2: return {true, false, true, true, false};
    case ScenarioId::S3: return {false, true, true, false, true};
  }
  return {};
}

WorkingModels scenario_models(ScenarioId s) {
  const auto ok = scenario_correctness(s);
  auto spec = [](bool correct, std::size_t width) {
    CovariateSpec c;
    c.columns.push_back(CovariateColumn::intercept());
    for (std::size_t j = 0; j < width; ++j)
      c.columns.push_back(correct ? CovariateColumn::bump(j) : CovariateColumn::square(j));
    return c;
  };
  WorkingModels m;
  m.pi = spec(ok[0], kSimDim);
  m.mu = spec(ok[1], kSimDim);
  m.delta = spec(ok[2], 3);
  m.tau = spec(ok[3], kSimDim);
  m.rho = spec(ok[4], kSimDim);
  return m;
}

const std::vector<std::string>& monte_carlo_estimators() {
  static const std::vector<std::string> names{"delta1",     "genius",       "genius_eff",  "mr",
                                              "ols",        "tsiv",         "dml_lasso",   "dml_forest",
                                              "dml_boosting", "sml_dagger", "sml_ddagger"};
  return names;
}

void MonteCarloConfig::validate() const {
  if (replications < 1) throw Error(ErrorCode::InvalidArgument, "replications must be at least 1");
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "n must be at least 1");
  if (estimators.empty()) throw Error(ErrorCode::InvalidArgument, "no estimators requested");
  const auto& known = monte_carlo_estimators();
  for (const auto& e : estimators)
    if (std::find(known.begin(), known.end(), e) == known.end())
      throw Error(ErrorCode::InvalidArgument, "unknown estimator '" + e + "'");
  if (K < 2 || K > kMaxFolds) throw Error(ErrorCode::InvalidArgument, "K must lie in [2, 10]");
  if (S < 1) throw Error(ErrorCode::InvalidArgument, "S must be at least 1");
  if (sml_candidates.empty() && !sml_oracle) throw Error(ErrorCode::InvalidArgument, "empty SML candidate list");
  if (forest_trees < 1 || boosting_trees < 0) throw Error(ErrorCode::InvalidArgument, "bad tree counts");
}

const EstimatorSummary& MonteCarloSummary::at(std::string_view name) const {
  for (const auto& e : estimators)
    if (e.name == name) return e;
  throw Error(ErrorCode::InvalidArgument, "no summary for '" + std::string(name) + "'");
}

EstimatorSummary summarize(std::string name, const std::vector<double>& estimates,
                           const std::vector<double>& std_errors, double truth) {
  EstimatorSummary s;
  s.name = std::move(name);
  s.replications = static_cast<int>(estimates.size());
  CompensatedSum sum, sq, se_sum;
  std::size_t covered = 0;
  for (std::size_t r = 0; r < estimates.size(); ++r) {
    const double e = estimates[r], se = r < std_errors.size() ? std_errors[r] : 0.0;
    if (!std::isfinite(e)) {
      ++s.failures;
      continue;
    }
    s.estimates.push_back(e);
    s.std_errors.push_back(se);
    sum.add(e);
    sq.add((e - truth) * (e - truth));
    se_sum.add(se);
    if (std::abs(e - truth) <= kZ95 * se) ++covered;
  }
  const std::size_t m = s.estimates.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (m == 0) {
    s.mean = s.bias = s.sd = s.rmse = s.median_bias = s.coverage = s.mean_se = nan;
    return s;
  }
  const double dm = static_cast<double>(m);
  s.mean = sum.value() / dm;
  s.bias = s.mean - truth;
  s.sd = m > 1 ? sample_sd(s.estimates) : 0.0;
  s.rmse = std::sqrt(sq.value() / dm);
  s.median_bias = median(s.estimates) - truth;
  s.coverage = static_cast<double>(covered) / dm;
  s.mean_se = se_sum.value() / dm;
  return s;
}

namespace {

LearnerKind tuned(LearnerType t, Family f, const MonteCarloConfig& c) {
  LearnerKind k = LearnerKind::make(t, f);
  k.forest.trees = c.forest_trees;
  k.boosting.trees = c.boosting_trees;
  return k;
}

Candidate oracle_candidate(Role r) {
  switch (r) {
    case Role::pi: return Candidate::fixed_x("oracle", rowwise(true_pi1));
    case Role::mu: return Candidate::fixed_zx("oracle", rowwise_z(true_mu));
    case Role::delta: return Candidate::fixed_x("oracle", rowwise(true_delta));
    case Role::tau: return Candidate::fixed_zx("oracle", rowwise_z(true_tau));
    case Role::rho: return Candidate::fixed_x("oracle", rowwise(true_rho));
  }
  throw Error(ErrorCode::InvalidArgument, "unknown role");
}

struct Outcome {
  double estimate = std::numeric_limits<double>::quiet_NaN();
  double se = 0.0;
  std::string error;
};

}  // namespace

MonteCarloSummary run_monte_carlo(const MonteCarloConfig& config) {
  config.validate();
  const auto& known = monte_carlo_estimators();
  const std::size_t E = config.estimators.size(), R = static_cast<std::size_t>(config.replications);
  const WorkingModels models = scenario_models(config.scenario);

  CandidateLists sml_lists;
  for (Role r : kRoles) {
    auto& l = sml_lists.lists[static_cast<std::size_t>(r)];
    for (LearnerType t : config.sml_candidates) l.push_back(Candidate::learned(tuned(t, role_family(r), config)));
    if (config.sml_oracle) l.push_back(oracle_candidate(r));
  }

  std::vector<std::vector<Outcome>> out(R, std::vector<Outcome>(E));
  std::vector<std::size_t> clamped(R, 0);

  parallel_for(R, config.threads, [&](std::size_t rep) {
    const std::uint64_t rep_seed = derive_seed(config.seed, rep);
    const SimulatedData sim = generate_dataset(config.n, derive_seed(rep_seed, 0));
    clamped[rep] = sim.clamped;
    std::optional<std::pair<EstimateReport, EstimateReport>> bench;
    std::optional<SplitCache> cache;
    std::optional<PseudoRiskTable> table;
    for (std::size_t e = 0; e < E; ++e) {
      const std::string& name = config.estimators[e];
      // Streams depend on the estimator name only, so adding estimators leaves others unchanged.
      const auto pos = static_cast<std::uint64_t>(std::find(known.begin(), known.end(), name) - known.begin());
      const std::uint64_t seed = derive_seed(rep_seed, 100 + pos);
      Outcome& o = out[rep][e];
      try {
        ParametricConfig pc;
        pc.seed = seed;
        EstimateReport rep_;
        if (name == "delta1") {
          rep_ = estimate_delta1(sim.data, models, pc);
        } else if (name == "genius") {
          rep_ = estimate_genius(sim.data, models, pc);
        } else if (name == "genius_eff") {
          rep_ = estimate_genius_eff(sim.data, models, pc);
        } else if (name == "mr") {
          rep_ = estimate_mr(sim.data, models, pc);
        } else if (name == "ols" || name == "tsiv") {
          if (!bench) bench = estimate_benchmarks(sim.data, BenchmarkModels::defaults(kSimDim), pc);
          rep_ = name == "ols" ? bench->first : bench->second;
        } else if (name.rfind("dml_", 0) == 0) {
          const LearnerType t = parse_learner_type(name.substr(4));
          NuisanceLearnerSet kinds;
          for (Role r : kRoles) kinds.kinds[static_cast<std::size_t>(r)] = tuned(t, role_family(r), config);
          rep_ = estimate_dml(sim.data, kinds, CrossFitPlan{config.K, seed});
        } else {
          if (!cache) {
            SmlConfig sc;
            sc.S = config.S;
            sc.seed = derive_seed(rep_seed, 100 + 9);  // shared by both criteria
            cache = build_cache(sim.data, sml_lists, sc);
            table = compute_risk_table(*cache);
          }
          rep_ = select_from_cache(*cache, *table, name == "sml_dagger" ? Criterion::dagger : Criterion::ddagger)
                     .report;
        }
        if (!std::isfinite(rep_.estimate) || !std::isfinite(rep_.std_error))
          throw Error(ErrorCode::NonFiniteEvaluation, "non-finite estimate");
        o.estimate = rep_.estimate;
        o.se = rep_.std_error;
      } catch (const std::exception& ex) {
        o.estimate = std::numeric_limits<double>::quiet_NaN();
        o.error = ex.what();
      }
    }
  });

  MonteCarloSummary summary;
  summary.config = config;
  for (std::size_t r = 0; r < R; ++r) summary.clamped += clamped[r];
  for (std::size_t e = 0; e < E; ++e) {
    std::vector<double> est(R), se(R);
    for (std::size_t r = 0; r < R; ++r) {
      est[r] = out[r][e].estimate;
      se[r] = out[r][e].se;
    }
    EstimatorSummary s = summarize(config.estimators[e], est, se);
    for (std::size_t r = 0; r < R; ++r)
      if (!out[r][e].error.empty()) s.errors.push_back("replication " + std::to_string(r + 1) + ": " + out[r][e].error);
    summary.estimators.push_back(std::move(s));
  }
  return summary;
}

}  // namespace ivmr
