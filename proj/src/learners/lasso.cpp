#include <algorithm>
#include <cmath>

#include "ivmr/error.hpp"
#include "ivmr/kernels.hpp"
#include "ivmr/learners.hpp"
#include "ivmr/numerics.hpp"

namespace ivmr {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

class LinearModel final : public Model {
 public:
  LinearModel(double intercept, VectorXd coef, bool logistic)
      : intercept_(intercept), coef_(std::move(coef)), logistic_(logistic) {}

  VectorXd predict(const MatrixXd& x) const override {
    VectorXd eta = (x * coef_).array() + intercept_;
    if (logistic_) eta = eta.unaryExpr([](double e) { return expit(e); });
    return eta;
  }

 private:
  double intercept_;
  VectorXd coef_;
  bool logistic_;
};

struct Scaled {
  MatrixXd x;  // centered (and scaled) copy, column-major
  VectorXd mean, scale;
  std::vector<bool> active;
};

Scaled standardize(const MatrixXd& x, bool scale_columns) {
  Scaled s;
  const Index n = x.rows(), q = x.cols();
  s.mean = x.colwise().mean().transpose();
  s.scale = VectorXd::Ones(q);
  s.active.assign(static_cast<std::size_t>(q), true);
  s.x = x.rowwise() - s.mean.transpose();
  for (Index j = 0; j < q; ++j) {
    const double sd = std::sqrt(s.x.col(j).squaredNorm() / static_cast<double>(n));
    if (!(sd > 1e-12 * (1.0 + std::abs(s.mean(j))))) {
      s.active[static_cast<std::size_t>(j)] = false;
      s.x.col(j).setZero();
      continue;
    }
    if (scale_columns) {
      s.scale(j) = sd;
      s.x.col(j) /= sd;
    }
  }
  return s;
}

double soft(double v, double lambda) {
  if (v > lambda) return v - lambda;
  if (v < -lambda) return v + lambda;
  return 0.0;
}

struct PathPoint {
  double intercept = 0.0;  // on the centered scale
  VectorXd beta;
};

// Gaussian coordinate descent along a decreasing lambda sequence.
std::vector<PathPoint> gaussian_path(const Scaled& s, const VectorXd& y, const std::vector<double>& lambdas,
                                     const LassoParams& params) {
  const Index n = s.x.rows(), q = s.x.cols();
  const double nn = static_cast<double>(n);
  const double ybar = y.mean();
  VectorXd r = y.array() - ybar;
  VectorXd beta = VectorXd::Zero(q);
  std::vector<double> csq(static_cast<std::size_t>(q));
  for (Index j = 0; j < q; ++j)
    csq[static_cast<std::size_t>(j)] = kernels::dot(s.x.col(j).data(), s.x.col(j).data(), static_cast<std::size_t>(n)) / nn;
  std::vector<PathPoint> out;
  for (double lambda : lambdas) {
    for (int pass = 0; pass < params.max_passes; ++pass) {
      double max_delta = 0.0;
      for (Index j = 0; j < q; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        if (!s.active[ju]) continue;
        const double* xj = s.x.col(j).data();
        const double grad = kernels::dot(xj, r.data(), static_cast<std::size_t>(n)) / nn;
        const double nb = soft(grad + csq[ju] * beta(j), lambda) / csq[ju];
        const double diff = nb - beta(j);
        if (diff != 0.0) {
          kernels::axpy(-diff, xj, r.data(), static_cast<std::size_t>(n));
          beta(j) = nb;
          max_delta = std::max(max_delta, std::abs(diff) * std::sqrt(csq[ju]));
        }
      }
      if (max_delta < params.tol) break;
    }
    out.push_back({ybar, beta});
  }
  return out;
}

// Penalized IRLS with weighted coordinate descent inside each reweighting.
std::vector<PathPoint> binomial_path(const Scaled& s, const VectorXd& y, const std::vector<double>& lambdas,
                                     const LassoParams& params) {
  const Index n = s.x.rows(), q = s.x.cols();
  const double nn = static_cast<double>(n);
  const auto nu = static_cast<std::size_t>(n);
  const double ybar = std::clamp(y.mean(), 1e-6, 1.0 - 1e-6);
  double b0 = logit(ybar);
  VectorXd beta = VectorXd::Zero(q);
  VectorXd eta(n), w(n), r(n);
  std::vector<PathPoint> out;
  for (double lambda : lambdas) {
    for (int outer = 0; outer < 25; ++outer) {
      eta = (s.x * beta).array() + b0;
      for (Index i = 0; i < n; ++i) {
        const double p = expit(eta(i));
        w(i) = std::max(p * (1.0 - p), 1e-5);
        r(i) = (y(i) - p) / w(i);
      }
      const double wsum = kernels::sum(w.data(), nu);
      std::vector<double> csq(static_cast<std::size_t>(q));
      for (Index j = 0; j < q; ++j)
        csq[static_cast<std::size_t>(j)] =
            kernels::weighted_dot(w.data(), s.x.col(j).data(), s.x.col(j).data(), nu) / nn;
      double outer_delta = 0.0;
      for (int pass = 0; pass < params.max_passes; ++pass) {
        double max_delta = 0.0;
        const double d0 = kernels::dot(w.data(), r.data(), nu) / wsum;
        if (d0 != 0.0) {
          b0 += d0;
          r.array() -= d0;
          max_delta = std::abs(d0) * std::sqrt(wsum / nn);
        }
        for (Index j = 0; j < q; ++j) {
          const auto ju = static_cast<std::size_t>(j);
          if (!s.active[ju] || !(csq[ju] > 0.0)) continue;
          const double* xj = s.x.col(j).data();
          const double grad = kernels::weighted_dot(w.data(), xj, r.data(), nu) / nn;
          const double nb = soft(grad + csq[ju] * beta(j), lambda) / csq[ju];
          const double diff = nb - beta(j);
          if (diff != 0.0) {
            kernels::axpy(-diff, xj, r.data(), nu);
            beta(j) = nb;
            max_delta = std::max(max_delta, std::abs(diff) * std::sqrt(csq[ju]));
          }
        }
        outer_delta = std::max(outer_delta, max_delta);
        if (max_delta < params.tol) break;
      }
      if (outer_delta < params.tol * 10.0) break;
      if (beta.norm() > 1e3) break;  // runaway under separation at tiny lambda
    }
    out.push_back({b0, beta});
  }
  return out;
}

std::vector<PathPoint> fit_path(const Scaled& s, const VectorXd& y, Family family, const std::vector<double>& lambdas,
                                const LassoParams& params) {
  return family == Family::binary ? binomial_path(s, y, lambdas, params) : gaussian_path(s, y, lambdas, params);
}

std::pair<double, VectorXd> to_original(const Scaled& s, const PathPoint& p) {
  VectorXd coef = p.beta.cwiseQuotient(s.scale);
  return {p.intercept - s.mean.dot(coef), coef};
}

double lambda_max_scaled(const Scaled& s, const VectorXd& y) {
  const VectorXd yc = y.array() - y.mean();
  return (s.x.transpose() * yc).cwiseAbs().maxCoeff() / static_cast<double>(s.x.rows());
}

std::vector<double> lambda_grid(double lmax, const LassoParams& params) {
  std::vector<double> out;
  const int k = params.n_lambda;
  for (int i = 0; i < k; ++i) {
    const double frac = k == 1 ? 0.0 : static_cast<double>(i) / (k - 1);
    out.push_back(lmax * std::pow(params.lambda_min_ratio, frac));
  }
  return out;
}

double loss(const VectorXd& y, const VectorXd& pred, Family family) {
  double s = 0.0;
  for (Index i = 0; i < y.size(); ++i) {
    if (family == Family::binary) {
      const double p = std::clamp(pred(i), 1e-10, 1.0 - 1e-10);
      s += -2.0 * (y(i) * std::log(p) + (1.0 - y(i)) * std::log(1.0 - p));
    } else {
      s += (y(i) - pred(i)) * (y(i) - pred(i));
    }
  }
  return s;
}

MatrixXd take_rows(const MatrixXd& x, const std::vector<std::size_t>& rows) {
  MatrixXd out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = x.row(static_cast<Index>(rows[i]));
  return out;
}

VectorXd take(const VectorXd& v, const std::vector<std::size_t>& rows) {
  VectorXd out(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Index>(i)) = v(static_cast<Index>(rows[i]));
  return out;
}

bool constant(const VectorXd& y) { return y.size() == 0 || y.maxCoeff() == y.minCoeff(); }

FittedLearner constant_lasso(const MatrixXd& x, const VectorXd& y, Family family, const LassoParams& params) {
  LearnerKind kind = LearnerKind::make(LearnerType::lasso, family);
  kind.lasso = params;
  TrainingMeta meta;
  const double m = y.size() ? y.mean() : 0.0;
  meta.linear_coefficients = VectorXd::Zero(x.cols() + 1);
  meta.linear_coefficients(0) = m;
  // Binary constant targets predict the raw frequency; the learner clamp applies on output.
  auto model = std::make_shared<LinearModel>(m, VectorXd::Zero(x.cols()), false);
  return FittedLearner(kind, model, meta);
}

FittedLearner finish(const MatrixXd& x, const VectorXd& y, Family family, const LassoParams& params,
                     const Scaled& s, const PathPoint& p, double lambda) {
  const auto [b0, coef] = to_original(s, p);
  LearnerKind kind = LearnerKind::make(LearnerType::lasso, family);
  kind.lasso = params;
  TrainingMeta meta;
  meta.selected_lambda = lambda;
  meta.linear_coefficients.resize(coef.size() + 1);
  meta.linear_coefficients(0) = b0;
  meta.linear_coefficients.tail(coef.size()) = coef;
  auto model = std::make_shared<LinearModel>(b0, coef, family == Family::binary);
  meta.in_sample_loss = loss(y, model->predict(x), family) / static_cast<double>(y.size());
  return FittedLearner(kind, model, meta);
}

void check_inputs(const MatrixXd& x, const VectorXd& y) {
  if (x.rows() != y.size()) throw Error(ErrorCode::InvalidArgument, "features and target differ in length");
  if (x.rows() < 10) throw Error(ErrorCode::TooFewObservations, "learners need at least 10 rows");
}

}  // namespace

double lasso_lambda_max(const MatrixXd& features, const VectorXd& y, bool standardize_columns) {
  return lambda_max_scaled(standardize(features, standardize_columns), y);
}

FittedLearner fit_lasso_at(const MatrixXd& features, const VectorXd& y, Family family, double lambda,
                           const LassoParams& params) {
  check_inputs(features, y);
  if (!(lambda >= 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda must be non-negative");
  if (constant(y)) return constant_lasso(features, y, family, params);
  const Scaled s = standardize(features, params.standardize);
  const auto path = fit_path(s, y, family, {lambda}, params);
  return finish(features, y, family, params, s, path.back(), lambda);
}

FittedLearner fit_lasso(const MatrixXd& features, const VectorXd& y, Family family, const LassoParams& params,
                        std::uint64_t seed) {
  check_inputs(features, y);
  if (params.n_lambda < 1 || params.cv_folds < 2 || !(params.lambda_min_ratio > 0.0 && params.lambda_min_ratio < 1.0))
    throw Error(ErrorCode::InvalidArgument, "invalid lasso hyperparameters");
  if (constant(y)) return constant_lasso(features, y, family, params);

  const Scaled full = standardize(features, params.standardize);
  const double lmax = lambda_max_scaled(full, y);
  if (!(lmax > 0.0)) return constant_lasso(features, y, family, params);
  const std::vector<double> grid = lambda_grid(lmax, params);

  const std::size_t n = static_cast<std::size_t>(y.size());
  const int k = std::min<int>(params.cv_folds, static_cast<int>(n));
  Rng rng(seed);
  const std::vector<std::size_t> perm = permutation(n, rng);
  std::vector<int> fold(n);
  for (std::size_t pos = 0; pos < n; ++pos) fold[perm[pos]] = static_cast<int>(pos * static_cast<std::size_t>(k) / n);

  std::vector<double> cv(grid.size(), 0.0);
  for (int f = 0; f < k; ++f) {
    std::vector<std::size_t> tr, va;
    for (std::size_t i = 0; i < n; ++i) (fold[i] == f ? va : tr).push_back(i);
    const MatrixXd xtr = take_rows(features, tr), xva = take_rows(features, va);
    const VectorXd ytr = take(y, tr), yva = take(y, va);
    if (constant(ytr)) {
      const VectorXd pred = VectorXd::Constant(yva.size(), ytr.mean());
      const double l = loss(yva, pred, family);
      for (double& c : cv) c += l;
      continue;
    }
    const Scaled s = standardize(xtr, params.standardize);
    const auto path = fit_path(s, ytr, family, grid, params);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const auto [b0, coef] = to_original(s, path[g]);
      VectorXd pred = (xva * coef).array() + b0;
      if (family == Family::binary) pred = pred.unaryExpr([](double e) { return expit(e); });
      cv[g] += loss(yva, pred, family);
    }
  }
  const std::size_t best = static_cast<std::size_t>(std::min_element(cv.begin(), cv.end()) - cv.begin());
  const std::vector<double> sub(grid.begin(), grid.begin() + static_cast<std::ptrdiff_t>(best + 1));
  const auto path = fit_path(full, y, family, sub, params);
  return finish(features, y, family, params, full, path.back(), grid[best]);
}

}  // namespace ivmr
