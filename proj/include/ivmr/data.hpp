#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ivmr {

struct Observation {
  double y = 0.0;
  int a = 0;
  int z = 0;
  std::vector<double> x;
};

/// Positions of each role inside a raw row.
struct ColumnSchema {
  std::size_t y = 0;
  std::size_t a = 1;
  std::size_t z = 2;
  std::vector<std::size_t> x;

  /// y, a, z in the first three slots followed by `p` covariates.
  static ColumnSchema leading(std::size_t p);
};

/// Immutable columnar store of (Y, A, Z, X) observations.
///
/// Subsets share the underlying columns and carry only an index list, so
/// folds and splits never copy covariates until a caller materializes them
/// with covariates().
class Dataset {
 public:
  Dataset() = default;

  /// Checks binary A/Z and finiteness; does not require both instrument arms.
  static Dataset from_columns(std::vector<double> y, std::vector<int> a, std::vector<int> z,
                              Eigen::MatrixXd x);

  std::size_t size() const { return rows_ ? rows_->size() : (storage_ ? storage_->y.size() : 0); }
  std::size_t dim() const { return storage_ ? static_cast<std::size_t>(storage_->x.cols()) : 0; }
  bool empty() const { return size() == 0; }

  double y(std::size_t i) const { return storage_->y[row(i)]; }
  int a(std::size_t i) const { return storage_->a[row(i)]; }
  int z(std::size_t i) const { return storage_->z[row(i)]; }
  double x(std::size_t i, std::size_t j) const {
    return storage_->x(static_cast<Eigen::Index>(row(i)), static_cast<Eigen::Index>(j));
  }
  Observation observation(std::size_t i) const;

  Dataset subset(std::span<const std::size_t> rows) const;

  Eigen::MatrixXd covariates() const;
  Eigen::VectorXd outcomes() const;
  Eigen::VectorXd treatments() const;
  Eigen::VectorXd instruments() const;

  /// Same observations with the outcome column replaced.
  Dataset with_outcomes(const Eigen::VectorXd& y) const;

  bool has_both_arms() const;
  /// Throws DegenerateInstrument unless both z=0 and z=1 occur.
  void require_both_arms() const;

 private:
  struct Storage {
    std::vector<double> y;
    std::vector<int> a;
    std::vector<int> z;
    Eigen::MatrixXd x;
  };

  std::size_t row(std::size_t i) const { return rows_ ? (*rows_)[i] : i; }

  std::shared_ptr<const Storage> storage_;
  std::shared_ptr<const std::vector<std::size_t>> rows_;
};

Dataset validate_dataset(const std::vector<std::vector<double>>& rows, const ColumnSchema& schema);

struct CovariateColumn {
  enum class Transform { raw, logistic_bump, centered_square, intercept };

  Transform transform = Transform::raw;
  std::size_t index = 0;

  static CovariateColumn raw(std::size_t j) { return {Transform::raw, j}; }
  static CovariateColumn bump(std::size_t j) { return {Transform::logistic_bump, j}; }
  static CovariateColumn square(std::size_t j) { return {Transform::centered_square, j}; }
  static CovariateColumn intercept() { return {Transform::intercept, 0}; }

  double apply(std::span<const double> x) const;
  std::string to_string() const;
  static CovariateColumn parse(const std::string& token);

  friend bool operator==(const CovariateColumn&, const CovariateColumn&) = default;
};

struct CovariateSpec {
  std::vector<CovariateColumn> columns;

  std::size_t width() const { return columns.size(); }
  /// IndexOutOfRange for j >= p; InvalidArgument for repeated intercepts.
  void validate(std::size_t p) const;

  static CovariateSpec parse(const std::vector<std::string>& tokens);
  std::vector<std::string> tokens() const;

  friend bool operator==(const CovariateSpec&, const CovariateSpec&) = default;
};

double logistic_bump(double x);
double centered_square(double x);

Eigen::MatrixXd apply_spec(const Eigen::MatrixXd& x, const CovariateSpec& spec);
Eigen::MatrixXd apply_spec(const Dataset& data, const CovariateSpec& spec);

}  // namespace ivmr
