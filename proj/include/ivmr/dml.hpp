#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "ivmr/data.hpp"
#include "ivmr/estimate.hpp"
#include "ivmr/influence.hpp"
#include "ivmr/nuisance.hpp"

namespace ivmr {

struct CrossFitPlan {
  int K = 2;
  std::uint64_t seed = 0;
};

constexpr int kMaxFolds = 10;

/// Fold id in [0, K) for each observation; fold sizes differ by at most one.
std::vector<int> make_folds(std::size_t n, int K, std::uint64_t seed);

/// Fits a bundle on a training fold; the seed is derived per fold.
using BundleFitter = std::function<FittedBundle(const Dataset& train, std::uint64_t seed)>;

EstimateReport estimate_dml(const Dataset& data, const NuisanceLearnerSet& kinds, const CrossFitPlan& plan,
                            const TrimPolicy& trim = {});
EstimateReport estimate_dml(const Dataset& data, const BundleFitter& fitter, const CrossFitPlan& plan,
                            const TrimPolicy& trim = {});

}  // namespace ivmr
