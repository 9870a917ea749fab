#include <algorithm>
#include <cmath>

#include "ivmr/error.hpp"
#include "ivmr/learners.hpp"
#include "ivmr/numerics.hpp"

namespace ivmr {

namespace {

class BoostedModel final : public Model {
 public:
  BoostedModel(double base, double shrinkage, std::vector<tree::Tree> trees, bool logistic)
      : base_(base), shrinkage_(shrinkage), trees_(std::move(trees)), logistic_(logistic) {}

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override {
    Eigen::VectorXd f = Eigen::VectorXd::Constant(x.rows(), base_);
    for (const auto& t : trees_)
      for (Eigen::Index i = 0; i < x.rows(); ++i) f(i) += shrinkage_ * t.predict(x, i);
    if (logistic_) f = f.unaryExpr([](double e) { return expit(e); });
    return f;
  }

 private:
  double base_;
  double shrinkage_;
  std::vector<tree::Tree> trees_;
  bool logistic_;
};

double stage_loss(const Eigen::VectorXd& y, const Eigen::VectorXd& f, bool logistic) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (logistic) {
      // log(1 + e^f) - y f
      const double v = f(i);
      s += (v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v))) - y(i) * v;
    } else {
      s += (y(i) - f(i)) * (y(i) - f(i));
    }
  }
  return y.size() ? s / static_cast<double>(y.size()) : 0.0;
}

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& x, const std::vector<std::size_t>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(idx[i]));
  return out;
}

Eigen::VectorXd rows_of(const Eigen::VectorXd& v, const std::vector<std::size_t>& idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(static_cast<Eigen::Index>(idx[i]));
  return out;
}

}  // namespace

FittedLearner fit_boosting(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Family family,
                           const BoostingParams& params, std::uint64_t seed) {
  if (x.rows() != y.size()) throw Error(ErrorCode::InvalidArgument, "features and target differ in length");
  if (x.rows() < 10) throw Error(ErrorCode::TooFewObservations, "learners need at least 10 rows");
  if (params.trees < 0 || params.depth < 1 || !(params.shrinkage > 0.0) || !(params.subsample > 0.0 && params.subsample <= 1.0) ||
      !(params.validation_fraction >= 0.0 && params.validation_fraction < 1.0) || params.patience < 1 || params.min_leaf < 1)
    throw Error(ErrorCode::InvalidArgument, "invalid boosting hyperparameters");

  const bool logistic = family == Family::binary;
  const auto n = static_cast<std::size_t>(x.rows());
  Rng rng(seed);
  const std::vector<std::size_t> perm = permutation(n, rng);
  std::size_t n_val = static_cast<std::size_t>(std::floor(params.validation_fraction * static_cast<double>(n)));
  if (params.trees == 0) n_val = 0;
  std::vector<std::size_t> tr_idx(perm.begin() + static_cast<std::ptrdiff_t>(n_val), perm.end());
  std::vector<std::size_t> va_idx(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::sort(tr_idx.begin(), tr_idx.end());
  std::sort(va_idx.begin(), va_idx.end());
  const Eigen::MatrixXd xtr = rows_of(x, tr_idx), xva = rows_of(x, va_idx);
  const Eigen::VectorXd ytr = rows_of(y, tr_idx), yva = rows_of(y, va_idx);
  const std::size_t m = tr_idx.size();

  const double ybar = ytr.mean();
  const double base = logistic ? logit(std::clamp(ybar, 1e-6, 1.0 - 1e-6)) : ybar;
  Eigen::VectorXd ftr = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(m), base);
  Eigen::VectorXd fva = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n_val), base);

  const auto order = tree::presort(xtr);
  tree::Params tp;
  tp.max_depth = params.depth;
  tp.min_leaf = params.min_leaf;
  std::vector<tree::Tree> trees;
  std::vector<double> g(m), h(m);
  std::vector<std::uint32_t> count(m);
  std::vector<std::size_t> pool(m);
  const std::size_t take = std::max<std::size_t>(1, static_cast<std::size_t>(std::round(params.subsample * static_cast<double>(m))));

  double best_loss = n_val ? stage_loss(yva, fva, logistic) : 0.0;
  std::size_t best_count = 0;
  for (int stage = 0; stage < params.trees; ++stage) {
    for (std::size_t i = 0; i < m; ++i) pool[i] = i;
    std::fill(count.begin(), count.end(), 0u);
    for (std::size_t k = 0; k < take; ++k) {
      const std::size_t pick = k + rng.below(m - k);
      std::swap(pool[k], pool[pick]);
      count[pool[k]] = 1;
    }
    for (std::size_t i = 0; i < m; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      if (logistic) {
        const double p = expit(ftr(ii));
        g[i] = ytr(ii) - p;
        h[i] = std::max(p * (1.0 - p), 1e-12);
      } else {
        g[i] = ytr(ii) - ftr(ii);
        h[i] = 1.0;
      }
    }
    tree::Tree t = tree::grow(xtr, order, g, h, count, tp, derive_seed(seed, static_cast<std::uint64_t>(stage) + 1));
    for (std::size_t i = 0; i < m; ++i) ftr(static_cast<Eigen::Index>(i)) += params.shrinkage * t.predict(xtr, static_cast<Eigen::Index>(i));
    for (std::size_t i = 0; i < n_val; ++i) fva(static_cast<Eigen::Index>(i)) += params.shrinkage * t.predict(xva, static_cast<Eigen::Index>(i));
    trees.push_back(std::move(t));
    if (n_val == 0) {
      best_count = trees.size();
      continue;
    }
    const double l = stage_loss(yva, fva, logistic);
    if (l < best_loss - 1e-12 * std::abs(best_loss)) {
      best_loss = l;
      best_count = trees.size();
    } else if (trees.size() - best_count >= static_cast<std::size_t>(params.patience)) {
      break;
    }
  }
  trees.resize(best_count, tree::Tree({}));

  LearnerKind kind = LearnerKind::make(LearnerType::boosting, family);
  kind.boosting = params;
  TrainingMeta meta;
  meta.tree_count = static_cast<int>(best_count);
  auto model = std::make_shared<BoostedModel>(base, params.shrinkage, std::move(trees), logistic);
  meta.in_sample_loss = (model->predict(x) - y).squaredNorm() / static_cast<double>(n);
  return FittedLearner(kind, model, meta);
}

}  // namespace ivmr
