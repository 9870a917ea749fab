#include <algorithm>

#include "ivmr/error.hpp"
#include "ivmr/learners.hpp"

namespace ivmr {

std::string to_string(LearnerType t) {
  switch (t) {
    case LearnerType::lasso: return "lasso";
    case LearnerType::forest: return "forest";
    case LearnerType::boosting: return "boosting";
  }
  return "unknown";
}

LearnerType parse_learner_type(const std::string& name) {
  if (name == "lasso") return LearnerType::lasso;
  if (name == "forest" || name == "rf") return LearnerType::forest;
  if (name == "boosting" || name == "gbm") return LearnerType::boosting;
  throw Error(ErrorCode::ParseError, "unknown learner '" + name + "'");
}

LearnerKind LearnerKind::make(LearnerType type, Family family) {
  LearnerKind k;
  k.type = type;
  k.family = family;
  return k;
}

void LearnerKind::validate() const {
  bool ok = true;
  switch (type) {
    case LearnerType::lasso:
      ok = lasso.n_lambda >= 1 && lasso.cv_folds >= 2 && lasso.lambda_min_ratio > 0.0 && lasso.lambda_min_ratio < 1.0 &&
           lasso.max_passes >= 1 && lasso.tol > 0.0;
      break;
    case LearnerType::forest:
      ok = forest.trees >= 1 && forest.min_leaf >= 1 && forest.mtry >= 0 && forest.max_depth >= 0;
      break;
    case LearnerType::boosting:
      ok = boosting.trees >= 0 && boosting.depth >= 1 && boosting.shrinkage > 0.0 && boosting.subsample > 0.0 &&
           boosting.subsample <= 1.0 && boosting.validation_fraction >= 0.0 && boosting.validation_fraction < 1.0 &&
           boosting.patience >= 1 && boosting.min_leaf >= 1;
      break;
  }
  if (!ok) throw Error(ErrorCode::InvalidArgument, "hyperparameters out of range for " + name());
}

FittedLearner::FittedLearner(LearnerKind kind, std::shared_ptr<const Model> model, TrainingMeta meta)
    : kind_(std::move(kind)), model_(std::move(model)), meta_(std::move(meta)) {}

Eigen::VectorXd FittedLearner::predict(const Eigen::MatrixXd& features) const {
  Eigen::VectorXd p = model_->predict(features);
  if (kind_.family == Family::binary)
    p = p.unaryExpr([](double v) { return std::clamp(v, kBinaryClampLo, kBinaryClampHi); });
  return p;
}

FittedLearner fit_learner(const LearnerKind& kind, const Eigen::MatrixXd& features, const Eigen::VectorXd& y,
                          std::uint64_t seed) {
  kind.validate();
  switch (kind.type) {
    case LearnerType::lasso: return fit_lasso(features, y, kind.family, kind.lasso, seed);
    case LearnerType::forest: return fit_forest(features, y, kind.family, kind.forest, seed);
    case LearnerType::boosting: return fit_boosting(features, y, kind.family, kind.boosting, seed);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown learner type");
}

}  // namespace ivmr
