#include <doctest.h>

#include <cmath>
#include <vector>

#include "ivmr/data.hpp"
#include "ivmr/error.hpp"

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

std::vector<std::vector<double>> small_rows() {
  return {{1.5, 1, 0, 0.2, 3.0}, {-0.5, 0, 1, 0.8, 1.0}, {2.0, 1, 1, 0.5, -2.0}, {0.0, 0, 0, 0.1, 0.0}};
}

}  // namespace

TEST_CASE("validate_dataset reads rows under the leading schema") {
  const Dataset d = validate_dataset(small_rows(), ColumnSchema::leading(2));
  CHECK(d.size() == 4);
  CHECK(d.dim() == 2);
  CHECK(d.y(2) == 2.0);
  CHECK(d.a(1) == 0);
  CHECK(d.z(1) == 1);
  CHECK(d.x(3, 1) == 0.0);
  const Observation o = d.observation(0);
  CHECK(o.x == std::vector<double>{0.2, 3.0});
}

TEST_CASE("validation errors carry the offending row") {
  auto rows = small_rows();
  rows[2][1] = 2.0;
  try {
    validate_dataset(rows, ColumnSchema::leading(2));
    FAIL("expected NonBinaryTreatment");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonBinaryTreatment);
    REQUIRE(e.row().has_value());
    CHECK(*e.row() == 2);
  }
  rows = small_rows();
  rows[1][2] = 0.5;
  CHECK(code_of([&] { validate_dataset(rows, ColumnSchema::leading(2)); }) == ErrorCode::NonBinaryInstrument);
  rows = small_rows();
  rows[3][4] = std::nan("");
  CHECK(code_of([&] { validate_dataset(rows, ColumnSchema::leading(2)); }) == ErrorCode::NonFiniteValue);
  rows = small_rows();
  for (auto& r : rows) r[2] = 1.0;
  CHECK(code_of([&] { validate_dataset(rows, ColumnSchema::leading(2)); }) == ErrorCode::DegenerateInstrument);
  CHECK(code_of([&] { validate_dataset({}, ColumnSchema::leading(2)); }) == ErrorCode::TooFewObservations);
}

TEST_CASE("custom schema picks columns by position") {
  ColumnSchema s;
  s.y = 4;
  s.a = 0;
  s.z = 1;
  s.x = {2};
  const Dataset d = validate_dataset({{1, 0, 0.3, 9, 7.5}, {0, 1, 0.6, 9, -1.0}}, s);
  CHECK(d.y(0) == 7.5);
  CHECK(d.a(0) == 1);
  CHECK(d.x(1, 0) == 0.6);
}

TEST_CASE("subsets share storage and index correctly") {
  const Dataset d = validate_dataset(small_rows(), ColumnSchema::leading(2));
  const std::vector<std::size_t> rows{3, 1};
  const Dataset s = d.subset(rows);
  CHECK(s.size() == 2);
  CHECK(s.y(0) == d.y(3));
  CHECK(s.x(1, 0) == d.x(1, 0));
  const std::vector<std::size_t> nested{1};
  CHECK(s.subset(nested).y(0) == d.y(1));
  const std::vector<std::size_t> bad{7};
  CHECK(code_of([&] { d.subset(bad); }) == ErrorCode::IndexOutOfRange);
  CHECK(s.covariates().rows() == 2);
  CHECK(s.covariates()(0, 1) == d.x(3, 1));
}

TEST_CASE("with_outcomes replaces y only") {
  const Dataset d = validate_dataset(small_rows(), ColumnSchema::leading(2));
  Eigen::VectorXd y = Eigen::VectorXd::Constant(4, 9.0);
  const Dataset e = d.with_outcomes(y);
  CHECK(e.y(2) == 9.0);
  CHECK(e.a(2) == d.a(2));
  CHECK(d.y(2) == 2.0);
  CHECK(code_of([&] { d.with_outcomes(Eigen::VectorXd::Zero(3)); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("covariate transforms") {
  CHECK(logistic_bump(0.5) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(logistic_bump(1.0) == doctest::Approx(1.0 / (1.0 + std::exp(-10.0))).epsilon(1e-15));
  CHECK(centered_square(0.5) == 0.0);
  CHECK(centered_square(0.0) == doctest::Approx(0.25));

  CovariateSpec spec;
  spec.columns = {CovariateColumn::intercept(), CovariateColumn::bump(0), CovariateColumn::square(1),
                  CovariateColumn::raw(1)};
  Eigen::MatrixXd x(2, 2);
  x << 0.5, 0.0, 1.0, 0.75;
  const Eigen::MatrixXd f = apply_spec(x, spec);
  REQUIRE(f.cols() == 4);
  CHECK(f(0, 0) == 1.0);
  CHECK(f(0, 1) == doctest::Approx(0.5));
  CHECK(f(0, 2) == doctest::Approx(0.25));
  CHECK(f(1, 2) == doctest::Approx(0.0625));
  CHECK(f(1, 3) == 0.75);
}

TEST_CASE("spec validation and token round trip") {
  CovariateSpec spec;
  spec.columns = {CovariateColumn::raw(3)};
  CHECK(code_of([&] { spec.validate(2); }) == ErrorCode::IndexOutOfRange);
  spec.columns = {CovariateColumn::intercept(), CovariateColumn::intercept()};
  CHECK(code_of([&] { spec.validate(2); }) == ErrorCode::InvalidArgument);

  const CovariateSpec s = CovariateSpec::parse({"intercept", "bump:0", "square:4", "raw:2"});
  CHECK(CovariateSpec::parse(s.tokens()) == s);
  CHECK(code_of([&] { CovariateSpec::parse({"cube:1"}); }) == ErrorCode::ParseError);
  CHECK(code_of([&] { CovariateSpec::parse({"raw:x"}); }) == ErrorCode::ParseError);
}

TEST_CASE("row permutation permutes the materialized covariates") {
  const Dataset d = validate_dataset(small_rows(), ColumnSchema::leading(2));
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  const Dataset p = d.subset(perm);
  CovariateSpec spec = CovariateSpec::parse({"intercept", "bump:0"});
  const Eigen::MatrixXd a = apply_spec(d, spec);
  const Eigen::MatrixXd b = apply_spec(p, spec);
  for (std::size_t i = 0; i < perm.size(); ++i)
    CHECK(b.row(static_cast<Eigen::Index>(i)) == a.row(static_cast<Eigen::Index>(perm[i])));
}
