#include "ivmr/data.hpp"

#include <cmath>

#include "ivmr/error.hpp"

namespace ivmr {

ColumnSchema ColumnSchema::leading(std::size_t p) {
  ColumnSchema s;
  for (std::size_t j = 0; j < p; ++j) s.x.push_back(3 + j);
  return s;
}

namespace {

void check_row(double y, int a, int z, std::span<const double> x, std::size_t i) {
  if (a != 0 && a != 1) throw Error(ErrorCode::NonBinaryTreatment, "treatment must be 0 or 1", i);
  if (z != 0 && z != 1) throw Error(ErrorCode::NonBinaryInstrument, "instrument must be 0 or 1", i);
  if (!std::isfinite(y)) throw Error(ErrorCode::NonFiniteValue, "outcome is not finite", i);
  for (double v : x)
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "covariate is not finite", i);
}

int as_binary(double v, ErrorCode code, std::size_t row) {
  if (v == 0.0) return 0;
  if (v == 1.0) return 1;
  throw Error(code, "expected 0 or 1, got " + std::to_string(v), row);
}

}  // namespace

Dataset Dataset::from_columns(std::vector<double> y, std::vector<int> a, std::vector<int> z,
                              Eigen::MatrixXd x) {
  const std::size_t n = y.size();
  if (a.size() != n || z.size() != n || static_cast<std::size_t>(x.rows()) != n)
    throw Error(ErrorCode::InvalidArgument, "column lengths differ");
  std::vector<double> row(static_cast<std::size_t>(x.cols()));
  for (std::size_t i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) row[static_cast<std::size_t>(j)] = x(static_cast<Eigen::Index>(i), j);
    check_row(y[i], a[i], z[i], row, i);
  }
  Dataset d;
  auto s = std::make_shared<Storage>();
  s->y = std::move(y);
  s->a = std::move(a);
  s->z = std::move(z);
  s->x = std::move(x);
  d.storage_ = std::move(s);
  return d;
}

Observation Dataset::observation(std::size_t i) const {
  Observation o{y(i), a(i), z(i), std::vector<double>(dim())};
  for (std::size_t j = 0; j < dim(); ++j) o.x[j] = x(i, j);
  return o;
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  auto mapped = std::make_shared<std::vector<std::size_t>>();
  mapped->reserve(rows.size());
  for (std::size_t r : rows) {
    if (r >= size()) throw Error(ErrorCode::IndexOutOfRange, "subset row " + std::to_string(r));
    mapped->push_back(row(r));
  }
  Dataset d;
  d.storage_ = storage_;
  d.rows_ = std::move(mapped);
  return d;
}

Eigen::MatrixXd Dataset::covariates() const {
  const auto n = static_cast<Eigen::Index>(size());
  const auto p = static_cast<Eigen::Index>(dim());
  if (!rows_) return storage_ ? storage_->x : Eigen::MatrixXd();
  Eigen::MatrixXd out(n, p);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      out(i, j) = storage_->x(static_cast<Eigen::Index>((*rows_)[static_cast<std::size_t>(i)]), j);
  return out;
}

Eigen::VectorXd Dataset::outcomes() const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(size()));
  for (std::size_t i = 0; i < size(); ++i) v(static_cast<Eigen::Index>(i)) = y(i);
  return v;
}

Eigen::VectorXd Dataset::treatments() const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(size()));
  for (std::size_t i = 0; i < size(); ++i) v(static_cast<Eigen::Index>(i)) = a(i);
  return v;
}

Eigen::VectorXd Dataset::instruments() const {
  Eigen::VectorXd v(static_cast<Eigen::Index>(size()));
  for (std::size_t i = 0; i < size(); ++i) v(static_cast<Eigen::Index>(i)) = z(i);
  return v;
}

Dataset Dataset::with_outcomes(const Eigen::VectorXd& y) const {
  if (static_cast<std::size_t>(y.size()) != size())
    throw Error(ErrorCode::InvalidArgument, "outcome length mismatch");
  std::vector<double> ys(y.data(), y.data() + y.size());
  std::vector<int> as(size()), zs(size());
  for (std::size_t i = 0; i < size(); ++i) {
    as[i] = a(i);
    zs[i] = z(i);
  }
  return from_columns(std::move(ys), std::move(as), std::move(zs), covariates());
}

bool Dataset::has_both_arms() const {
  bool zero = false, one = false;
  for (std::size_t i = 0; i < size() && !(zero && one); ++i) (z(i) ? one : zero) = true;
  return zero && one;
}

void Dataset::require_both_arms() const {
  if (!has_both_arms())
    throw Error(ErrorCode::DegenerateInstrument, "both instrument arms must be present");
}

Dataset validate_dataset(const std::vector<std::vector<double>>& rows, const ColumnSchema& schema) {
  if (rows.empty()) throw Error(ErrorCode::TooFewObservations, "no rows");
  const std::size_t p = schema.x.size();
  std::vector<double> y(rows.size());
  std::vector<int> a(rows.size()), z(rows.size());
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    auto at = [&](std::size_t pos) {
      if (pos >= r.size()) throw Error(ErrorCode::IndexOutOfRange, "schema column " + std::to_string(pos), i);
      return r[pos];
    };
    a[i] = as_binary(at(schema.a), ErrorCode::NonBinaryTreatment, i);
    z[i] = as_binary(at(schema.z), ErrorCode::NonBinaryInstrument, i);
    y[i] = at(schema.y);
    for (std::size_t j = 0; j < p; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = at(schema.x[j]);
  }
  Dataset d = Dataset::from_columns(std::move(y), std::move(a), std::move(z), std::move(x));
  d.require_both_arms();
  return d;
}

double logistic_bump(double x) { return 1.0 / (1.0 + std::exp(-20.0 * (x - 0.5))); }

double centered_square(double x) { return (x - 0.5) * (x - 0.5); }

double CovariateColumn::apply(std::span<const double> x) const {
  switch (transform) {
    case Transform::raw: return x[index];
    case Transform::logistic_bump: return logistic_bump(x[index]);
    case Transform::centered_square: return centered_square(x[index]);
    case Transform::intercept: return 1.0;
  }
  return 0.0;
}

std::string CovariateColumn::to_string() const {
  switch (transform) {
    case Transform::raw: return "raw:" + std::to_string(index);
    case Transform::logistic_bump: return "bump:" + std::to_string(index);
    case Transform::centered_square: return "square:" + std::to_string(index);
    case Transform::intercept: return "intercept";
  }
  return {};
}

CovariateColumn CovariateColumn::parse(const std::string& token) {
  if (token == "intercept" || token == "1") return intercept();
  const auto colon = token.find(':');
  if (colon == std::string::npos)
    throw Error(ErrorCode::ParseError, "covariate column '" + token + "'");
  const std::string kind = token.substr(0, colon);
  std::size_t j = 0;
  try {
    std::size_t used = 0;
    const unsigned long v = std::stoul(token.substr(colon + 1), &used);
    if (used != token.size() - colon - 1) throw std::invalid_argument("trailing");
    j = v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParseError, "covariate column index in '" + token + "'");
  }
  if (kind == "raw" || kind == "x") return raw(j);
  if (kind == "bump" || kind == "logistic_bump") return bump(j);
  if (kind == "square" || kind == "centered_square") return square(j);
  throw Error(ErrorCode::ParseError, "covariate transform '" + kind + "'");
}

void CovariateSpec::validate(std::size_t p) const {
  int intercepts = 0;
  for (const auto& c : columns) {
    if (c.transform == CovariateColumn::Transform::intercept) {
      if (++intercepts > 1) throw Error(ErrorCode::InvalidArgument, "more than one intercept column");
    } else if (c.index >= p) {
      throw Error(ErrorCode::IndexOutOfRange,
                  "column " + std::to_string(c.index) + " with p=" + std::to_string(p));
    }
  }
}

CovariateSpec CovariateSpec::parse(const std::vector<std::string>& tokens) {
  CovariateSpec s;
  for (const auto& t : tokens) s.columns.push_back(CovariateColumn::parse(t));
  return s;
}

std::vector<std::string> CovariateSpec::tokens() const {
  std::vector<std::string> out;
  for (const auto& c : columns) out.push_back(c.to_string());
  return out;
}

Eigen::MatrixXd apply_spec(const Eigen::MatrixXd& x, const CovariateSpec& spec) {
  spec.validate(static_cast<std::size_t>(x.cols()));
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd out(n, static_cast<Eigen::Index>(spec.width()));
  for (std::size_t c = 0; c < spec.width(); ++c) {
    const auto& col = spec.columns[c];
    const auto cc = static_cast<Eigen::Index>(c);
    const auto j = static_cast<Eigen::Index>(col.index);
    switch (col.transform) {
      case CovariateColumn::Transform::raw:
        out.col(cc) = x.col(j);
        break;
      case CovariateColumn::Transform::logistic_bump:
        for (Eigen::Index i = 0; i < n; ++i) out(i, cc) = logistic_bump(x(i, j));
        break;
      case CovariateColumn::Transform::centered_square:
        for (Eigen::Index i = 0; i < n; ++i) out(i, cc) = centered_square(x(i, j));
        break;
      case CovariateColumn::Transform::intercept:
        out.col(cc).setOnes();
        break;
    }
  }
  return out;
}

Eigen::MatrixXd apply_spec(const Dataset& data, const CovariateSpec& spec) {
  return apply_spec(data.covariates(), spec);
}

}  // namespace ivmr
