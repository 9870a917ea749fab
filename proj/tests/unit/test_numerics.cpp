#include <doctest.h>

#include <atomic>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "ivmr/error.hpp"
#include "ivmr/numerics.hpp"

using namespace ivmr;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no ivmr::Error thrown");
  return ErrorCode::InvalidArgument;
}

double loglik(const Eigen::MatrixXd& d, const Eigen::VectorXd& y, const Eigen::VectorXd& b) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < d.rows(); ++i) {
    const double e = d.row(i).dot(b);
    s += y(i) * e - std::log1p(std::exp(e));
  }
  return s;
}

}  // namespace

TEST_CASE("logistic intercept closed forms") {
  Eigen::MatrixXd d = Eigen::MatrixXd::Ones(8, 1);
  Eigen::VectorXd y(8);
  y << 1, 0, 1, 0, 1, 0, 1, 0;
  FitResult r = fit_logistic(d, y);
  CHECK(r.converged);
  CHECK(std::abs(r.coefficients(0)) < 1e-10);
  y << 1, 1, 1, 0, 1, 1, 1, 0;
  r = fit_logistic(d, y);
  CHECK(r.coefficients(0) == doctest::Approx(std::log(3.0)).epsilon(1e-9));
}

TEST_CASE("logistic fit matches a grid-refined likelihood maximizer") {
  Rng rng(17);
  const int n = 300;
  Eigen::MatrixXd d(n, 2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    d(i, 0) = 1.0;
    d(i, 1) = rng.normal();
    y(i) = rng.bernoulli(expit(-0.4 + 0.9 * d(i, 1))) ? 1.0 : 0.0;
  }
  const FitResult r = fit_logistic(d, y);
  REQUIRE(r.converged);
  Eigen::VectorXd best = Eigen::VectorXd::Zero(2);
  double width = 4.0;
  for (int round = 0; round < 30; ++round) {
    Eigen::VectorXd centre = best;
    double ll_best = loglik(d, y, best);
    for (int i = -10; i <= 10; ++i)
      for (int j = -10; j <= 10; ++j) {
        Eigen::VectorXd b = centre;
        b(0) += width * i / 10.0;
        b(1) += width * j / 10.0;
        const double ll = loglik(d, y, b);
        if (ll > ll_best) {
          ll_best = ll;
          best = b;
        }
      }
    width *= 0.4;
  }
  CHECK(std::abs(best(0) - r.coefficients(0)) < 1e-6);
  CHECK(std::abs(best(1) - r.coefficients(1)) < 1e-6);
}

TEST_CASE("logistic separation is flagged") {
  Eigen::MatrixXd d(6, 2);
  Eigen::VectorXd y(6);
  for (int i = 0; i < 6; ++i) {
    d(i, 0) = 1.0;
    d(i, 1) = i - 2.5;
    y(i) = i >= 3 ? 1.0 : 0.0;
  }
  const FitResult r = fit_logistic(d, y);
  CHECK(r.separation_detected);
  CHECK_FALSE(r.converged);
}

TEST_CASE("ols agrees with the normal equations") {
  Rng rng(3);
  Eigen::MatrixXd d(50, 3);
  Eigen::VectorXd y(50);
  for (int i = 0; i < 50; ++i) {
    d(i, 0) = 1.0;
    d(i, 1) = rng.normal();
    d(i, 2) = rng.uniform();
    y(i) = 2.0 - d(i, 1) + 0.5 * d(i, 2) + rng.normal();
  }
  const FitResult r = fit_ols(d, y);
  const Eigen::VectorXd ne = (d.transpose() * d).inverse() * d.transpose() * y;
  CHECK((r.coefficients - ne).cwiseAbs().maxCoeff() < 1e-10);

  Eigen::MatrixXd one = Eigen::MatrixXd::Ones(4, 1);
  Eigen::VectorXd v(4);
  v << 1, 2, 3, 6;
  CHECK(fit_ols(one, v).coefficients(0) == doctest::Approx(3.0));

  Eigen::MatrixXd dup(4, 2);
  dup << 1, 2, 1, 2, 1, 2, 1, 2;
  CHECK(code_of([&] { fit_ols(dup, v); }) == ErrorCode::RankDeficient);
}

TEST_CASE("moment solver") {
  const VectorFn g = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(1);
    r(0) = x(0) * x(0) - 4.0;
    return r;
  };
  const FitResult r = solve_moment_system(g, Eigen::VectorXd::Constant(1, 1.0));
  CHECK(r.converged);
  CHECK(r.coefficients(0) == doctest::Approx(2.0).epsilon(1e-8));

  Eigen::MatrixXd A(2, 2);
  A << 3, 1, 1, 2;
  Eigen::VectorXd b(2);
  b << 1, -1;
  const VectorFn lin = [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(A * x - b); };
  const FitResult l = solve_moment_system(lin, Eigen::VectorXd::Zero(2));
  CHECK(l.iterations == 1);
  CHECK((l.coefficients - A.inverse() * b).norm() < 1e-8);

  const VectorFn none = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd r(1);
    r(0) = x(0) * x(0) + 1.0;
    return r;
  };
  SolverConfig cfg;
  cfg.max_iter = 30;
  const ErrorCode c = code_of([&] { solve_moment_system(none, Eigen::VectorXd::Constant(1, 0.5), cfg); });
  CHECK((c == ErrorCode::NoConvergence || c == ErrorCode::SingularJacobian));
}

TEST_CASE("numeric jacobian") {
  const VectorFn sq = [](const Eigen::VectorXd& x) { return Eigen::VectorXd(x.array().square()); };
  const Eigen::MatrixXd j = numeric_jacobian(sq, Eigen::VectorXd::Constant(1, 3.0), 1e-5);
  CHECK(j(0, 0) == doctest::Approx(6.0).epsilon(1e-8));

  Eigen::MatrixXd A(2, 3);
  A << 1, -2, 0.5, 4, 0, -1;
  const VectorFn lin = [&](const Eigen::VectorXd& x) { return Eigen::VectorXd(A * x); };
  Eigen::VectorXd at(3);
  at << 0.3, -1.0, 2.0;
  CHECK((numeric_jacobian(lin, at, 1e-4) - A).cwiseAbs().maxCoeff() < 1e-9);

  const VectorFn bad = [](const Eigen::VectorXd& x) { return Eigen::VectorXd(x.array().log()); };
  CHECK(code_of([&] { numeric_jacobian(bad, Eigen::VectorXd::Constant(1, 1e-9), 1e-4); }) ==
        ErrorCode::NonFiniteEvaluation);
}

TEST_CASE("normal helpers") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5));
  CHECK(normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
  for (double p : {1e-10, 0.001, 0.2, 0.5, 0.77, 0.999})
    CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-10));
  CHECK(expit(logit(0.3)) == doctest::Approx(0.3));
  CHECK(expit(-800.0) >= 0.0);
  CHECK(expit(800.0) <= 1.0);
}

TEST_CASE("truncated normal sampling") {
  Rng rng(99);
  const double sd = 0.8, c = 0.5;
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = sample_truncated_normal(0.0, sd, -c, c, rng);
    REQUIRE(std::abs(u) <= c);
    s += u;
    s2 += u * u;
  }
  const double m = s / n;
  CHECK(std::abs(m) < 0.005);
  const double v = s2 / n - m * m;
  const double vt = truncated_normal_variance(sd, c);
  CHECK(std::abs(v - vt) / vt < 0.02);
  CHECK(vt < c * c / 3.0 + 1e-12);  // below the uniform variance on [-c, c]
  CHECK(code_of([&] { sample_truncated_normal(0.0, 1.0, 1.0, 1.0, rng); }) == ErrorCode::DegenerateInterval);
  CHECK(code_of([&] { sample_truncated_normal(0.0, 1.0, 60.0, 61.0, rng); }) == ErrorCode::DegenerateInterval);
}

TEST_CASE("rng streams are reproducible") {
  Rng a(5), b(5), c(6);
  bool differ = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    CHECK(x == b.next());
    differ |= x != c.next();
  }
  CHECK(differ);
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
  CHECK(derive_seed(7, 3) == derive_seed(7, 3));
  Rng r(1);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform_open();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
  }
  Rng p1(2), p2(2);
  CHECK(permutation(20, p1) == permutation(20, p2));
}

TEST_CASE("parallel_for covers every index and rethrows the lowest failure") {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  CHECK(std::accumulate(hits.begin(), hits.end(), 0) == 1000);
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  for (int trial = 0; trial < 5; ++trial) {
    try {
      parallel_for(200, 4, [](std::size_t i) {
        if (i % 37 == 11) throw std::runtime_error(std::to_string(i));
      });
      FAIL("expected throw");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()) == "11");
    }
  }
}

TEST_CASE("summary helpers") {
  CompensatedSum s;
  s.add(1.0);
  for (int i = 0; i < 10; ++i) s.add(1e-16);
  s.add(-1.0);
  CHECK(s.value() == doctest::Approx(1e-15).epsilon(1e-6));
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK(quantile({0.0, 10.0}, 0.25) == doctest::Approx(2.5));
  CHECK(mean({1.0, 2.0, 6.0}) == 3.0);
  CHECK(sample_sd({1.0, 3.0}) == doctest::Approx(std::sqrt(2.0)));
}
