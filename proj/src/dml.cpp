#include "ivmr/dml.hpp"

#include <cmath>

#include "ivmr/error.hpp"
#include "ivmr/numerics.hpp"

namespace ivmr {

std::vector<int> make_folds(std::size_t n, int K, std::uint64_t seed) {
  if (K < 2 || K > kMaxFolds) throw Error(ErrorCode::InvalidArgument, "K must lie in [2, 10]");
  if (n < static_cast<std::size_t>(K)) throw Error(ErrorCode::TooFewObservations, "fewer observations than folds");
  Rng rng(seed);
  const auto perm = permutation(n, rng);
  std::vector<int> fold(n);
  for (std::size_t pos = 0; pos < n; ++pos)
    fold[perm[pos]] = static_cast<int>(pos * static_cast<std::size_t>(K) / n);
  return fold;
}

EstimateReport estimate_dml(const Dataset& data, const NuisanceLearnerSet& kinds, const CrossFitPlan& plan,
                            const TrimPolicy& trim) {
  kinds.validate();
  return estimate_dml(
      data, [&](const Dataset& train, std::uint64_t seed) { return fit_nuisance_sequence(train, kinds, trim, seed); },
      plan, trim);
}

EstimateReport estimate_dml(const Dataset& data, const BundleFitter& fitter, const CrossFitPlan& plan,
                            const TrimPolicy& trim) {
  trim.validate();
  const std::size_t n = data.size();
  if (plan.K < 2 || plan.K > kMaxFolds) throw Error(ErrorCode::InvalidArgument, "K must lie in [2, 10]");
  if (n < 20 * static_cast<std::size_t>(plan.K))
    throw Error(ErrorCode::TooFewObservations, "cross-fitting needs n >= 20 K");
  data.require_both_arms();

  const std::vector<int> fold = make_folds(n, plan.K, derive_seed(plan.seed, 0));
  std::vector<std::vector<std::size_t>> in(static_cast<std::size_t>(plan.K)), out(static_cast<std::size_t>(plan.K));
  for (std::size_t i = 0; i < n; ++i)
    for (int k = 0; k < plan.K; ++k) (fold[i] == k ? in : out)[static_cast<std::size_t>(k)].push_back(i);

  std::vector<double> phi(n);
  std::vector<kernels::TrimCounts> trims(static_cast<std::size_t>(plan.K));
  std::vector<std::size_t> wins(static_cast<std::size_t>(plan.K));
  parallel_for(static_cast<std::size_t>(plan.K), 0, [&](std::size_t k) {
    FittedBundle fb;
    try {
      fb = fitter(data.subset(out[k]), derive_seed(plan.seed, k + 1));
    } catch (const std::exception& e) {
      throw Error(ErrorCode::FoldFitFailure, "fold " + std::to_string(k) + ": " + e.what());
    }
    const Dataset eval = data.subset(in[k]);
    Eigen::VectorXd values;
    trims[k] = influence_values(eval, evaluate_bundle(fb.bundle, eval), InfluenceKind::phi_eff, trim, values);
    wins[k] = fb.winsorized;
    for (std::size_t j = 0; j < in[k].size(); ++j) phi[in[k][j]] = values(static_cast<Eigen::Index>(j));
  });

  const double est = mean(phi);
  auto r = EstimateReport::make(EstimatorId::dml, est, sample_sd(phi) / std::sqrt(static_cast<double>(n)));
  for (std::size_t k = 0; k < trims.size(); ++k) {
    r.diagnostics.trim += trims[k];
    r.diagnostics.winsorized += wins[k];
  }
  if (!std::isfinite(est)) {
    r.diagnostics.converged = false;
    r.diagnostics.notes.push_back("non-finite influence values");
  }
  return r;
}

}  // namespace ivmr
