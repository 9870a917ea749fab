#include <cmath>

#include "ivmr/error.hpp"
#include "ivmr/learners.hpp"
#include "ivmr/numerics.hpp"

namespace ivmr {

namespace {

class ForestModel final : public Model {
 public:
  explicit ForestModel(std::vector<tree::Tree> trees) : trees_(std::move(trees)) {}

  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const override {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(x.rows());
    for (const auto& t : trees_)
      for (Eigen::Index i = 0; i < x.rows(); ++i) out(i) += t.predict(x, i);
    return out / static_cast<double>(trees_.size());
  }

 private:
  std::vector<tree::Tree> trees_;
};

}  // namespace

FittedLearner fit_forest(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, Family family,
                         const ForestParams& params, std::uint64_t seed) {
  if (x.rows() != y.size()) throw Error(ErrorCode::InvalidArgument, "features and target differ in length");
  if (x.rows() < 10) throw Error(ErrorCode::TooFewObservations, "learners need at least 10 rows");
  if (params.trees < 1 || params.min_leaf < 1 || params.mtry < 0 || params.max_depth < 0)
    throw Error(ErrorCode::InvalidArgument, "invalid forest hyperparameters");

  const auto n = static_cast<std::size_t>(x.rows());
  const auto order = tree::presort(x);
  const std::vector<double> g(y.data(), y.data() + y.size());
  const std::vector<double> h(n, 1.0);
  tree::Params tp;
  tp.max_depth = params.max_depth;
  tp.min_leaf = params.min_leaf;
  tp.mtry = params.mtry > 0 ? params.mtry : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(x.cols()))));

  std::vector<tree::Tree> trees(static_cast<std::size_t>(params.trees), tree::Tree({}));
  parallel_for(trees.size(), 0, [&](std::size_t t) {
    Rng rng(derive_seed(seed, 2 * t));
    std::vector<std::uint32_t> count(n, params.bootstrap ? 0u : 1u);
    if (params.bootstrap)
      for (std::size_t k = 0; k < n; ++k) ++count[rng.below(n)];
    trees[t] = tree::grow(x, order, g, h, count, tp, derive_seed(seed, 2 * t + 1));
  });

  LearnerKind kind = LearnerKind::make(LearnerType::forest, family);
  kind.forest = params;
  TrainingMeta meta;
  meta.tree_count = params.trees;
  auto model = std::make_shared<ForestModel>(std::move(trees));
  meta.in_sample_loss = (model->predict(x) - y).squaredNorm() / static_cast<double>(n);
  return FittedLearner(kind, model, meta);
}

}  // namespace ivmr
