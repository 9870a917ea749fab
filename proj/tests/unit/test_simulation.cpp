#include <doctest.h>

#include <cmath>
#include <limits>

#include "ivmr/error.hpp"
#include "ivmr/numerics.hpp"
#include "ivmr/simulation.hpp"

using namespace ivmr;

namespace {

std::vector<double> row(const Dataset& d, std::size_t i) {
  std::vector<double> x(d.dim());
  for (std::size_t j = 0; j < d.dim(); ++j) x[j] = d.x(i, j);
  return x;
}

}  // namespace

TEST_CASE("generated data shape and determinism") {
  const SimulatedData s = generate_dataset(500, 3);
  CHECK(s.data.size() == 500);
  CHECK(s.data.dim() == kSimDim);
  CHECK(s.u.size() == 500);
  const Eigen::MatrixXd x = s.data.covariates();
  CHECK(x.minCoeff() >= 0.0);
  CHECK(x.maxCoeff() < 1.0);
  CHECK(s.u.cwiseAbs().maxCoeff() <= 0.5);
  const SimulatedData t = generate_dataset(500, 3);
  CHECK(t.data.outcomes() == s.data.outcomes());
  CHECK(t.data.covariates() == x);
  CHECK(generate_dataset(500, 4).data.outcomes() != s.data.outcomes());
}

TEST_CASE("instrument propensity at the centre point") {
  const std::vector<double> mid(5, 0.5);
  CHECK(true_pi1(mid) == doctest::Approx(1.0 / (1.0 + std::exp(-1.05))).epsilon(1e-12));
  CHECK(true_pi1(mid) == doctest::Approx(0.7408).epsilon(1e-4));
}

TEST_CASE("the effect averages to 1.5") {
  Rng rng(11);
  const int n = 1000000;
  CompensatedSum s;
  std::vector<double> x(5);
  for (int i = 0; i < n; ++i) {
    for (double& v : x) v = rng.uniform();
    s.add(true_delta(x));
  }
  CHECK(std::abs(s.value() / n - kTrueAte) < 0.01);
}

TEST_CASE("empirical instrument rate matches its integral") {
  Rng rng(12);
  const int n = 1000000;
  CompensatedSum s;
  std::vector<double> x(5);
  for (int i = 0; i < n; ++i) {
    for (double& v : x) v = rng.uniform();
    s.add(true_pi1(x));
  }
  const SimulatedData d = generate_dataset(1000000, 13);
  CHECK(std::abs(d.data.instruments().mean() - s.value() / n) < 0.005);
  CHECK(double(d.clamped) / 1e6 < 0.001);
}

TEST_CASE("truth functions are consistent with generated data") {
  const SimulatedData s = generate_dataset(200000, 14);
  const Dataset& d = s.data;
  CompensatedSum resid, cov, rho;
  CompensatedSum cov_sq;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto x = row(d, i);
    const int z = d.z(i);
    const double ya = d.y(i) - true_delta(x) * d.a(i);
    resid.add(ya - true_tau(z, x));
    const double c = (d.a(i) - true_mu(z, x)) * ya;
    cov.add(c);
    cov_sq.add(c * c);
    rho.add(true_rho(x));
  }
  const double n = double(d.size());
  CHECK(std::abs(resid.value() / n) < 0.02);
  const double se = std::sqrt(cov_sq.value() / n) / std::sqrt(n);
  CHECK(std::abs(cov.value() / n - rho.value() / n) < 4.0 * se);
}

TEST_CASE("scenario definitions") {
  using A = std::array<bool, 5>;
  CHECK(scenario_correctness(ScenarioId::S0) == A{true, true, true, true, true});
  CHECK(scenario_correctness(ScenarioId::S1) == A{true, true, false, false, false});
  CHECK(scenario_correctness(ScenarioId::S2) == A{true, false, true, true, false});
  CHECK(scenario_correctness(ScenarioId::S3) == A{false, true, true, false, true});
  const WorkingModels m = scenario_models(ScenarioId::S3);
  CHECK(m.pi.columns.back().transform == CovariateColumn::Transform::centered_square);
  CHECK(m.mu.columns.back().transform == CovariateColumn::Transform::logistic_bump);
  CHECK(m.delta.columns.back().transform == CovariateColumn::Transform::logistic_bump);
  CHECK(m.tau.columns.back().transform == CovariateColumn::Transform::centered_square);
  CHECK(parse_scenario("S2") == ScenarioId::S2);
  CHECK(to_string(ScenarioId::S1) == "S1");
  CHECK_THROWS_AS(parse_scenario("S9"), Error);
}

TEST_CASE("summaries") {
  const EstimatorSummary one = summarize("mr", {1.7}, {0.05});
  CHECK(one.replications == 1);
  CHECK(one.failures == 0);
  CHECK(one.mean == 1.7);
  CHECK(one.bias == doctest::Approx(0.2));
  CHECK(one.coverage == 0.0);
  CHECK(summarize("mr", {1.55}, {0.05}).coverage == 1.0);

  const double nan = std::numeric_limits<double>::quiet_NaN();
  const EstimatorSummary f = summarize("mr", {1.4, nan, 1.6}, {0.1, nan, 0.1});
  CHECK(f.failures == 1);
  CHECK(f.estimates.size() == 2);
  CHECK(f.mean == doctest::Approx(1.5));
  CHECK(f.sd == doctest::Approx(std::sqrt(0.02)));
  CHECK(f.coverage == 1.0);
}

TEST_CASE("monte carlo runs are reproducible") {
  MonteCarloConfig cfg;
  cfg.n = 600;
  cfg.replications = 3;
  cfg.seed = 9;
  cfg.estimators = {"mr", "delta1", "ols"};
  cfg.threads = 2;
  const MonteCarloSummary a = run_monte_carlo(cfg);
  cfg.threads = 1;
  const MonteCarloSummary b = run_monte_carlo(cfg);
  for (const std::string name : {"mr", "delta1", "ols"}) {
    CHECK(a.at(name).estimates == b.at(name).estimates);
    CHECK(a.at(name).replications == 3);
  }
  cfg.replications = 1;
  const MonteCarloSummary c = run_monte_carlo(cfg);
  const auto& s = c.at("mr");
  if (s.failures == 0) {
    CHECK(s.mean == s.estimates[0]);
    CHECK((s.coverage == 0.0 || s.coverage == 1.0));
  }
  cfg.estimators = {"bogus"};
  CHECK_THROWS_AS(run_monte_carlo(cfg), Error);
}
