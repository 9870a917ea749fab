#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ivmr {

enum class LearnerType { lasso, forest, boosting };
enum class Family { binary, continuous };

std::string to_string(LearnerType t);
LearnerType parse_learner_type(const std::string& name);

struct LassoParams {
  int n_lambda = 50;
  double lambda_min_ratio = 1e-4;  // grid spans four decades below lambda_max
  int cv_folds = 5;
  bool standardize = true;
  int max_passes = 10000;
  double tol = 1e-9;
};

struct ForestParams {
  int trees = 200;
  int mtry = 0;  // 0: ceil(sqrt(q))
  int min_leaf = 5;
  bool bootstrap = true;
  int max_depth = 0;  // 0: unlimited
};

struct BoostingParams {
  int trees = 200;
  int depth = 3;
  double shrinkage = 0.05;
  double subsample = 0.8;
  double validation_fraction = 0.2;
  int patience = 20;
  int min_leaf = 5;
};

struct LearnerKind {
  LearnerType type = LearnerType::lasso;
  Family family = Family::continuous;
  LassoParams lasso;
  ForestParams forest;
  BoostingParams boosting;

  static LearnerKind make(LearnerType type, Family family);
  void validate() const;
  std::string name() const { return to_string(type); }
};

struct TrainingMeta {
  double selected_lambda = 0.0;
  int tree_count = 0;
  double in_sample_loss = 0.0;
  /// Lasso only: coefficients on the original feature scale, intercept first.
  Eigen::VectorXd linear_coefficients;
};

/// Raw model output; binary models return probabilities before clamping.
class Model {
 public:
  virtual ~Model() = default;
  virtual Eigen::VectorXd predict(const Eigen::MatrixXd& features) const = 0;
};

class FittedLearner {
 public:
  FittedLearner(LearnerKind kind, std::shared_ptr<const Model> model, TrainingMeta meta);

  /// Binary-family output is clamped to [0.005, 0.995].
  Eigen::VectorXd predict(const Eigen::MatrixXd& features) const;

  const LearnerKind& kind() const { return kind_; }
  const TrainingMeta& meta() const { return meta_; }

 private:
  LearnerKind kind_;
  std::shared_ptr<const Model> model_;
  TrainingMeta meta_;
};

constexpr double kBinaryClampLo = 0.005;
constexpr double kBinaryClampHi = 0.995;

FittedLearner fit_lasso(const Eigen::MatrixXd& features, const Eigen::VectorXd& y, Family family,
                        const LassoParams& params, std::uint64_t seed);
/// Single-lambda fit without cross-validation.
FittedLearner fit_lasso_at(const Eigen::MatrixXd& features, const Eigen::VectorXd& y, Family family, double lambda,
                           const LassoParams& params);
/// Smallest lambda at which every coefficient is zero.
double lasso_lambda_max(const Eigen::MatrixXd& features, const Eigen::VectorXd& y, bool standardize = true);

FittedLearner fit_forest(const Eigen::MatrixXd& features, const Eigen::VectorXd& y, Family family,
                         const ForestParams& params, std::uint64_t seed);
FittedLearner fit_boosting(const Eigen::MatrixXd& features, const Eigen::VectorXd& y, Family family,
                           const BoostingParams& params, std::uint64_t seed);

FittedLearner fit_learner(const LearnerKind& kind, const Eigen::MatrixXd& features, const Eigen::VectorXd& y,
                          std::uint64_t seed);

namespace tree {

struct Node {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct Params {
  int max_depth = 0;  // 0: unlimited
  int min_leaf = 1;
  int mtry = 0;       // 0: all features
};

class Tree {
 public:
  explicit Tree(std::vector<Node> nodes) : nodes_(std::move(nodes)) {}
  double predict(const Eigen::MatrixXd& x, Eigen::Index row) const;
  std::size_t size() const { return nodes_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }

 private:
  std::vector<Node> nodes_;
};

/// Per-feature ascending row orders, computed once per training matrix.
std::vector<std::vector<std::uint32_t>> presort(const Eigen::MatrixXd& x);

/// Grows one tree. `count[i]` is the multiplicity of row i (0 drops it).
/// Splits maximize SL^2/HL + SR^2/HR with S = sum count*g, H = sum count*h;
/// leaves predict S/H.
Tree grow(const Eigen::MatrixXd& x, const std::vector<std::vector<std::uint32_t>>& order,
          const std::vector<double>& g, const std::vector<double>& h, const std::vector<std::uint32_t>& count,
          const Params& params, std::uint64_t seed);

}  // namespace tree

}  // namespace ivmr
