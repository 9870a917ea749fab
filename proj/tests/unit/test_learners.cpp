#include <doctest.h>

#include <cmath>

#include "ivmr/error.hpp"
#include "ivmr/learners.hpp"
#include "ivmr/nuisance.hpp"
#include "ivmr/numerics.hpp"

using namespace ivmr;

namespace {

struct Sample {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

double additive(const Eigen::MatrixXd& x, Eigen::Index i) {
  return 2.0 * x(i, 0) + std::sin(3.0 * x(i, 1)) + (x(i, 2) - 0.5) * (x(i, 2) - 0.5) * 4.0;
}

Sample additive_sample(int n, std::uint64_t seed) {
  Rng rng(seed);
  Sample s{Eigen::MatrixXd(n, 5), Eigen::VectorXd(n)};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 5; ++j) s.x(i, j) = rng.uniform();
    s.y(i) = additive(s.x, i) + 0.3 * rng.normal();
  }
  return s;
}

double mse(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).squaredNorm() / double(a.size()); }

}  // namespace

TEST_CASE("lasso at lambda zero is least squares") {
  const Sample s = additive_sample(300, 1);
  const FittedLearner f = fit_lasso_at(s.x, s.y, Family::continuous, 0.0, LassoParams{});
  Eigen::MatrixXd d(300, 6);
  d.col(0).setOnes();
  d.rightCols(5) = s.x;
  const Eigen::VectorXd b = fit_ols(d, s.y).coefficients;
  CHECK((f.meta().linear_coefficients - b).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((f.predict(s.x) - d * b).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("lasso satisfies the KKT conditions at the selected lambda") {
  const Sample s = additive_sample(400, 2);
  const FittedLearner f = fit_lasso(s.x, s.y, Family::continuous, LassoParams{}, 9);
  const double lambda = f.meta().selected_lambda;
  REQUIRE(lambda > 0.0);
  const Eigen::VectorXd r = s.y - f.predict(s.x);
  const Eigen::VectorXd& beta = f.meta().linear_coefficients;
  const double n = 400.0;
  for (Eigen::Index j = 0; j < 5; ++j) {
    const Eigen::VectorXd c = s.x.col(j).array() - s.x.col(j).mean();
    const double sd = std::sqrt(c.squaredNorm() / n);
    const double g = (c / sd).dot(r) / n;
    if (beta(j + 1) != 0.0)
      CHECK(std::abs(g - lambda * (beta(j + 1) > 0 ? 1.0 : -1.0)) < 1e-6);
    else
      CHECK(std::abs(g) <= lambda + 1e-6);
  }
}

TEST_CASE("lasso above lambda max keeps only the intercept") {
  const Sample s = additive_sample(200, 3);
  const double lmax = lasso_lambda_max(s.x, s.y);
  const FittedLearner f = fit_lasso_at(s.x, s.y, Family::continuous, lmax * 1.0001, LassoParams{});
  CHECK(f.meta().linear_coefficients.tail(5).cwiseAbs().maxCoeff() == 0.0);
  CHECK((f.predict(s.x).array() - s.y.mean()).abs().maxCoeff() < 1e-10);
  const FittedLearner g = fit_lasso_at(s.x, s.y, Family::continuous, lmax * 0.9, LassoParams{});
  CHECK(g.meta().linear_coefficients.tail(5).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("binary learners clamp a constant target") {
  const Sample s = additive_sample(100, 4);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(100);
  for (LearnerType t : {LearnerType::lasso, LearnerType::forest, LearnerType::boosting}) {
    LearnerKind k = LearnerKind::make(t, Family::binary);
    k.forest.trees = 20;
    k.boosting.trees = 20;
    const Eigen::VectorXd p = fit_learner(k, s.x, ones, 1).predict(s.x);
    CHECK(p.minCoeff() == doctest::Approx(kBinaryClampHi));
    CHECK(p.maxCoeff() == doctest::Approx(kBinaryClampHi));
  }
}

TEST_CASE("forest and boosting beat the intercept on an additive target") {
  const Sample train = additive_sample(1000, 5), test = additive_sample(1000, 6);
  const double base = mse(Eigen::VectorXd::Constant(1000, train.y.mean()), test.y);
  const double forest = mse(fit_forest(train.x, train.y, Family::continuous, ForestParams{}, 1).predict(test.x), test.y);
  const double boost =
      mse(fit_boosting(train.x, train.y, Family::continuous, BoostingParams{}, 1).predict(test.x), test.y);
  CHECK(forest <= 0.5 * base);
  CHECK(boost <= 0.5 * base);
}

TEST_CASE("forest recovers a step function") {
  Rng rng(7);
  const int n = 1000;
  Eigen::MatrixXd x(n, 2), xt(n, 2);
  Eigen::VectorXd y(n), ft(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < 2; ++j) {
      x(i, j) = rng.uniform();
      xt(i, j) = rng.uniform();
    }
    y(i) = (x(i, 0) > 0.5 ? 1.0 : 0.0) + 0.1 * rng.normal();
    ft(i) = xt(i, 0) > 0.5 ? 1.0 : 0.0;
  }
  const FittedLearner f = fit_forest(x, y, Family::continuous, ForestParams{}, 3);
  CHECK(mse(f.predict(xt), ft) < 0.05);
}

TEST_CASE("tree learners on a constant target and zero boosting stages") {
  const Sample s = additive_sample(120, 8);
  const Eigen::VectorXd c = Eigen::VectorXd::Constant(120, 2.5);
  ForestParams fp;
  fp.trees = 10;
  CHECK((fit_forest(s.x, c, Family::continuous, fp, 2).predict(s.x).array() - 2.5).abs().maxCoeff() < 1e-12);
  BoostingParams bp;
  bp.trees = 0;
  const FittedLearner b = fit_boosting(s.x, s.y, Family::continuous, bp, 2);
  CHECK((b.predict(s.x).array() - s.y.mean()).abs().maxCoeff() < 1e-12);
  CHECK(b.meta().tree_count == 0);
  Eigen::VectorXd bin(120);
  for (int i = 0; i < 120; ++i) bin(i) = i % 4 == 0;
  const FittedLearner bb = fit_boosting(s.x, bin, Family::binary, bp, 2);
  CHECK((bb.predict(s.x).array() - 0.25).abs().maxCoeff() < 1e-12);
}

TEST_CASE("fits are deterministic under a fixed seed") {
  const Sample s = additive_sample(300, 9);
  for (LearnerType t : {LearnerType::lasso, LearnerType::forest, LearnerType::boosting}) {
    LearnerKind k = LearnerKind::make(t, Family::continuous);
    k.forest.trees = 30;
    const Eigen::VectorXd a = fit_learner(k, s.x, s.y, 42).predict(s.x);
    const Eigen::VectorXd b = fit_learner(k, s.x, s.y, 42).predict(s.x);
    CHECK(a == b);
  }
}

TEST_CASE("hyperparameter validation") {
  LearnerKind k = LearnerKind::make(LearnerType::forest, Family::continuous);
  k.forest.trees = 0;
  CHECK_THROWS_AS(k.validate(), Error);
  k = LearnerKind::make(LearnerType::boosting, Family::binary);
  k.boosting.shrinkage = 0.0;
  CHECK_THROWS_AS(k.validate(), Error);
  CHECK(parse_learner_type("forest") == LearnerType::forest);
  CHECK_THROWS_AS(parse_learner_type("svm"), Error);
}

namespace {

// Constant effect 2 with a valid, heteroscedastic instrument.
Dataset homogeneous(int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < n; ++i) {
    const double x1 = rng.uniform(), x2 = rng.uniform();
    const int z = rng.bernoulli(0.3 + 0.4 * x2);
    const int a = rng.bernoulli(z ? 0.5 : 0.15);
    rows.push_back({2.0 * a + x1 + rng.normal(), double(a), double(z), x1, x2});
  }
  return validate_dataset(rows, ColumnSchema::leading(2));
}

}  // namespace

TEST_CASE("nuisance sequence recovers a homogeneous effect") {
  const Dataset train = homogeneous(3000, 1), test = homogeneous(1000, 2);
  const FittedBundle fb = fit_nuisance_sequence(train, NuisanceLearnerSet::uniform(LearnerType::lasso), TrimPolicy{}, 5);
  const NuisanceValues v = evaluate_bundle(fb.bundle, test);
  const double err = (v.delta.array() - 2.0).square().mean();
  Eigen::VectorXd phi;
  influence_values(test, v, InfluenceKind::phi1, TrimPolicy{}, phi);
  const double baseline = (phi.array() - 2.0).square().mean();
  CHECK(err < baseline);
  CHECK(err < 0.25);
}

TEST_CASE("nuisance fits depend on the training rows only") {
  const Dataset d = homogeneous(600, 3);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < 400; ++i) rows.push_back(i);
  auto raw = std::vector<std::vector<double>>{};
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto o = d.observation(i);
    raw.push_back({i < 400 ? o.y : o.y + 100.0, double(o.a), double(i < 400 ? o.z : 1 - o.z), o.x[0], o.x[1]});
  }
  const Dataset e = validate_dataset(raw, ColumnSchema::leading(2));
  NuisanceLearnerSet kinds = NuisanceLearnerSet::uniform(LearnerType::forest);
  for (auto& k : kinds.kinds) k.forest.trees = 20;
  const FittedBundle a = fit_nuisance_sequence(d.subset(rows), kinds, TrimPolicy{}, 8);
  const FittedBundle b = fit_nuisance_sequence(e.subset(rows), kinds, TrimPolicy{}, 8);
  const NuisanceValues va = evaluate_bundle(a.bundle, d), vb = evaluate_bundle(b.bundle, d);
  CHECK(va.pi1 == vb.pi1);
  CHECK(va.mu1 == vb.mu1);
  CHECK(va.delta == vb.delta);
  CHECK(va.tau_obs == vb.tau_obs);
  CHECK(va.rho == vb.rho);
}

TEST_CASE("winsorize clips the tails") {
  Eigen::VectorXd v(200);
  for (int i = 0; i < 200; ++i) v(i) = i;
  v(0) = -1e6;
  v(199) = 1e6;
  const std::size_t changed = winsorize(v);
  CHECK(changed >= 2);
  CHECK(v.minCoeff() > -10.0);
  CHECK(v.maxCoeff() < 210.0);
}
