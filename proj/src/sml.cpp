#include "ivmr/sml.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "ivmr/error.hpp"
#include "ivmr/numerics.hpp"

namespace ivmr {

std::string format_tuple(const LearnerTuple& t) {
  std::string s = "(";
  for (std::size_t j = 0; j < t.size(); ++j) {
    if (j) s += ",";
    s += std::to_string(t[j] + 1);
  }
  return s + ")";
}

const std::vector<std::size_t>& IndexSets::upsilon(int k) {
  static const std::vector<std::size_t> u1{2, 3, 4}, u2{1, 4}, u3{0, 3};
  switch (k) {
    case 1: return u1;
    case 2: return u2;
    case 3: return u3;
  }
  throw Error(ErrorCode::InvalidArgument, "index set must be 1, 2 or 3");
}

std::vector<std::size_t> IndexSets::complement(int k) {
  const auto& u = upsilon(k);
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < 5; ++j)
    if (std::find(u.begin(), u.end(), j) == u.end()) out.push_back(j);
  return out;
}

std::array<std::size_t, 5> CandidateLists::sizes() const {
  std::array<std::size_t, 5> r{};
  for (std::size_t j = 0; j < 5; ++j) r[j] = lists[j].size();
  return r;
}

std::size_t CandidateLists::tuple_count() const {
  std::size_t t = 1;
  for (const auto& l : lists) t *= l.size();
  return t;
}

CandidateLists CandidateLists::uniform(const std::vector<LearnerType>& types) {
  CandidateLists c;
  for (Role r : kRoles)
    for (LearnerType t : types)
      c.lists[static_cast<std::size_t>(r)].push_back(Candidate::learned(LearnerKind::make(t, role_family(r))));
  return c;
}

std::size_t SplitCache::tuple_count() const {
  std::size_t t = 1;
  for (std::size_t v : r) t *= v;
  return t;
}

std::size_t SplitCache::index(const LearnerTuple& t) const {
  std::size_t idx = 0;
  for (std::size_t j = 0; j < 5; ++j) {
    if (t[j] >= r[j]) throw Error(ErrorCode::IndexOutOfRange, "tuple " + format_tuple(t) + " outside candidate ranges");
    idx = idx * r[j] + t[j];
  }
  return idx;
}

LearnerTuple SplitCache::tuple(std::size_t index) const {
  LearnerTuple t{};
  for (std::size_t j = 5; j-- > 0;) {
    t[j] = index % r[j];
    index /= r[j];
  }
  return t;
}

std::size_t dependency_fit_count(const std::array<std::size_t, 5>& r) {
  const std::size_t d = r[0] * r[1] * r[2];
  return r[0] + r[1] + d + d * r[3] + d * r[4];
}

namespace {

struct Task {
  std::size_t upstream_a = 0;  // role-specific parent indices
  std::size_t upstream_b = 0;
  std::size_t candidate = 0;
};

template <class Fn>
void run_tasks(std::size_t count, Role role, int split, const std::vector<Task>& tasks, Fn&& fn) {
  parallel_for(count, 0, [&](std::size_t i) {
    try {
      fn(i);
    } catch (const std::exception& e) {
      throw Error(ErrorCode::CandidateFitFailure, std::string(to_string(role)) + " candidate " +
                                                      std::to_string(tasks[i].candidate + 1) + ", split " +
                                                      std::to_string(split + 1) + ": " + e.what());
    }
  });
}

}  // namespace

SplitCache build_cache(const Dataset& data, const CandidateLists& candidates, const SmlConfig& config) {
  config.trim.validate();
  if (config.S < 1) throw Error(ErrorCode::InvalidArgument, "S must be at least 1");
  const auto r = candidates.sizes();
  for (std::size_t j = 0; j < 5; ++j)
    if (r[j] < 1) throw Error(ErrorCode::InvalidArgument, "every role needs at least one candidate");
  if (candidates.tuple_count() > config.cap)
    throw Error(ErrorCode::InvalidArgument, "candidate tuples exceed the cap of " + std::to_string(config.cap));
  const std::size_t n = data.size();
  if (n < 40) throw Error(ErrorCode::TooFewObservations, "sample splitting needs at least 40 observations");
  data.require_both_arms();

  const auto& L = candidates.lists;
  auto fixed = [&](Role role, std::size_t k) { return !L[static_cast<std::size_t>(role)][k].learner.has_value(); };

  SplitCache cache;
  cache.r = r;
  cache.S = config.S;
  const std::size_t T = cache.tuple_count();
  const auto S = static_cast<std::size_t>(config.S);
  cache.train_rows.resize(S);
  cache.valid_rows.resize(S);
  cache.values.assign(S, std::vector<Eigen::VectorXd>(T));
  cache.means.assign(S, std::vector<double>(T));
  cache.trims.assign(S, std::vector<kernels::TrimCounts>(T));
  cache.winsorized.assign(S, std::vector<std::size_t>(T));
  cache.fitted_models.assign(S, 0);

  for (std::size_t s = 0; s < S; ++s) {
    const int split = static_cast<int>(s);
    Rng rng(derive_seed(config.seed, s));
    const auto perm = permutation(n, rng);
    const std::size_t n_train = n / 2;
    std::vector<std::size_t> tr(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> va(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
    std::sort(tr.begin(), tr.end());
    std::sort(va.begin(), va.end());
    const Dataset train = data.subset(tr), valid = data.subset(va);
    const TrainingData t(train);
    const Eigen::MatrixXd xv = valid.covariates();
    const Eigen::VectorXd yv = valid.outcomes(), av = valid.treatments(), zv = valid.instruments();
    const Eigen::VectorXd z0 = Eigen::VectorXd::Zero(xv.rows()), z1 = Eigen::VectorXd::Ones(xv.rows());
    const std::uint64_t split_seed = derive_seed(config.seed, 1000 + s);

    // pi and mu: one fit per candidate.
    std::vector<Task> pi_tasks(r[0]), mu_tasks(r[1]);
    for (std::size_t i = 0; i < r[0]; ++i) pi_tasks[i].candidate = i;
    for (std::size_t j = 0; j < r[1]; ++j) mu_tasks[j].candidate = j;
    std::vector<Component> pi(r[0]), mu(r[1]);
    std::vector<Eigen::VectorXd> pi_v(r[0]), mu0_v(r[1]), mu1_v(r[1]);
    run_tasks(r[0], Role::pi, split, pi_tasks, [&](std::size_t i) {
      pi[i] = fit_pi(t, L[0][i], role_seed(split_seed, Role::pi, i));
      pi_v[i] = pi[i](zv, xv);
    });
    run_tasks(r[1], Role::mu, split, mu_tasks, [&](std::size_t j) {
      mu[j] = fit_mu(t, L[1][j], role_seed(split_seed, Role::mu, j));
      mu0_v[j] = mu[j](z0, xv);
      mu1_v[j] = mu[j](z1, xv);
    });

    // delta: once per (pi, mu, delta) combination; fixed candidates ignore upstream fits.
    std::vector<Task> d_tasks;
    std::vector<std::size_t> d_of(r[0] * r[1] * r[2]);
    {
      std::map<std::array<std::size_t, 3>, std::size_t> seen;
      for (std::size_t i = 0; i < r[0]; ++i)
        for (std::size_t j = 0; j < r[1]; ++j)
          for (std::size_t k = 0; k < r[2]; ++k) {
            const std::array<std::size_t, 3> key = fixed(Role::delta, k) ? std::array<std::size_t, 3>{0, 0, k}
                                                                          : std::array<std::size_t, 3>{i, j, k};
            auto [it, fresh] = seen.emplace(key, d_tasks.size());
            if (fresh) d_tasks.push_back({key[0], key[1], k});
            d_of[(i * r[1] + j) * r[2] + k] = it->second;
          }
    }
    std::vector<DeltaFit> delta(d_tasks.size());
    std::vector<Eigen::VectorXd> delta_v(d_tasks.size());
    run_tasks(d_tasks.size(), Role::delta, split, d_tasks, [&](std::size_t d) {
      const Task& tk = d_tasks[d];
      delta[d] = fit_delta(t, L[2][tk.candidate], pi[tk.upstream_a], mu[tk.upstream_b], config.trim,
                           role_seed(split_seed, Role::delta, d));
      delta_v[d] = delta[d].delta(z0, xv);
    });

    // tau: once per (delta fit, tau candidate).
    std::vector<Task> t_tasks;
    std::vector<std::size_t> t_of(d_tasks.size() * r[3]);
    {
      std::map<std::array<std::size_t, 2>, std::size_t> seen;
      for (std::size_t d = 0; d < d_tasks.size(); ++d)
        for (std::size_t l = 0; l < r[3]; ++l) {
          const std::array<std::size_t, 2> key = fixed(Role::tau, l) ? std::array<std::size_t, 2>{0, l}
                                                                      : std::array<std::size_t, 2>{d, l};
          auto [it, fresh] = seen.emplace(key, t_tasks.size());
          if (fresh) t_tasks.push_back({key[0], 0, l});
          t_of[d * r[3] + l] = it->second;
        }
    }
    std::vector<Eigen::VectorXd> tau_v(t_tasks.size());
    run_tasks(t_tasks.size(), Role::tau, split, t_tasks, [&](std::size_t k) {
      const Task& tk = t_tasks[k];
      const Component c = fit_tau(t, L[3][tk.candidate], delta[tk.upstream_a].delta,
                                  role_seed(split_seed, Role::tau, k));
      tau_v[k] = c(zv, xv);
    });

    // rho: once per (mu fit, delta fit, rho candidate).
    std::vector<Task> r_tasks;
    std::vector<std::size_t> r_of(r[1] * d_tasks.size() * r[4]);
    {
      std::map<std::array<std::size_t, 3>, std::size_t> seen;
      for (std::size_t j = 0; j < r[1]; ++j)
        for (std::size_t d = 0; d < d_tasks.size(); ++d)
          for (std::size_t m = 0; m < r[4]; ++m) {
            const std::array<std::size_t, 3> key = fixed(Role::rho, m) ? std::array<std::size_t, 3>{0, 0, m}
                                                                        : std::array<std::size_t, 3>{j, d, m};
            auto [it, fresh] = seen.emplace(key, r_tasks.size());
            if (fresh) r_tasks.push_back({key[0], key[1], m});
            r_of[(j * d_tasks.size() + d) * r[4] + m] = it->second;
          }
    }
    // Only (mu, delta) pairs that some tuple uses need a fit.
    std::vector<char> needed(r_tasks.size(), 0);
    for (std::size_t i = 0; i < r[0]; ++i)
      for (std::size_t j = 0; j < r[1]; ++j)
        for (std::size_t k = 0; k < r[2]; ++k)
          for (std::size_t m = 0; m < r[4]; ++m)
            needed[r_of[(j * d_tasks.size() + d_of[(i * r[1] + j) * r[2] + k]) * r[4] + m]] = 1;
    std::vector<Eigen::VectorXd> rho_v(r_tasks.size());
    run_tasks(r_tasks.size(), Role::rho, split, r_tasks, [&](std::size_t k) {
      if (!needed[k]) return;
      const Task& tk = r_tasks[k];
      const Component c = fit_rho(t, L[4][tk.candidate], mu[tk.upstream_a], delta[tk.upstream_b].delta,
                                  role_seed(split_seed, Role::rho, k));
      rho_v[k] = c(zv, xv);
    });
    std::size_t rho_fits = 0;
    for (char c : needed) rho_fits += c;
    cache.fitted_models[s] = r[0] + r[1] + d_tasks.size() + t_tasks.size() + rho_fits;

    cache.train_rows[s] = std::move(tr);
    cache.valid_rows[s] = std::move(va);
    const auto nv = static_cast<std::size_t>(xv.rows());
    parallel_for(T, 0, [&](std::size_t idx) {
      const LearnerTuple tu = cache.tuple(idx);
      const std::size_t d = d_of[(tu[0] * r[1] + tu[1]) * r[2] + tu[2]];
      const std::size_t tt = t_of[d * r[3] + tu[3]];
      const std::size_t rr = r_of[(tu[1] * d_tasks.size() + d) * r[4] + tu[4]];
      kernels::PhiInputs in{yv.data(),        av.data(),         zv.data(),         pi_v[tu[0]].data(),
                            mu0_v[tu[1]].data(), mu1_v[tu[1]].data(), delta_v[d].data(), tau_v[tt].data(),
                            rho_v[rr].data(),  nv};
      Eigen::VectorXd out(static_cast<Eigen::Index>(nv));
      cache.trims[s][idx] = kernels::phi_eff(in, config.trim.thresholds(), out.data());
      CompensatedSum sum;
      for (Eigen::Index i = 0; i < out.size(); ++i) sum.add(out(i));
      cache.means[s][idx] = sum.value() / static_cast<double>(nv);
      cache.values[s][idx] = std::move(out);
      cache.winsorized[s][idx] = delta[d].winsorized;
    });
  }
  return cache;
}

namespace {

// Calls fn(alt) for every assignment of the coordinates in `coords`, other coordinates from t.
template <class Fn>
void for_each_assignment(const LearnerTuple& t, const std::vector<std::size_t>& coords,
                         const std::array<std::size_t, 5>& r, Fn&& fn) {
  LearnerTuple alt = t;
  for (std::size_t c : coords) alt[c] = 0;
  for (;;) {
    fn(alt);
    std::size_t k = coords.size();
    while (k > 0) {
      const std::size_t c = coords[k - 1];
      if (++alt[c] < r[c]) break;
      alt[c] = 0;
      --k;
    }
    if (k == 0) return;
  }
}

double split_mean_sq_diff(const SplitCache& cache, std::size_t ia, std::size_t ib) {
  double s = 0.0;
  for (int sp = 0; sp < cache.S; ++sp) {
    const double d = cache.means[static_cast<std::size_t>(sp)][ia] - cache.means[static_cast<std::size_t>(sp)][ib];
    s += d * d;
  }
  return s / cache.S;
}

}  // namespace

double lambda_dagger(const LearnerTuple& t, int k, const SplitCache& cache) {
  const std::size_t it = cache.index(t);
  double best = 0.0;
  for_each_assignment(t, IndexSets::upsilon(k), cache.r, [&](const LearnerTuple& alt) {
    best = std::max(best, split_mean_sq_diff(cache, it, cache.index(alt)));
  });
  return best;
}

double lambda_ddagger(const LearnerTuple& t, int k, const SplitCache& cache) {
  const auto& coords = IndexSets::upsilon(k);
  std::vector<std::size_t> members;
  for_each_assignment(t, coords, cache.r, [&](const LearnerTuple& alt) { members.push_back(cache.index(alt)); });
  double best = 0.0;
  for (std::size_t a : members)
    for (std::size_t b : members)
      if (a != b) best = std::max(best, split_mean_sq_diff(cache, a, b));
  return best;
}

PseudoRiskTable compute_risk_table(const SplitCache& cache) {
  PseudoRiskTable table(cache.tuple_count());
  parallel_for(table.size(), 0, [&](std::size_t idx) {
    PseudoRiskRow& row = table[idx];
    row.tuple = cache.tuple(idx);
    for (int k = 1; k <= 3; ++k) {
      row.lambda_dagger[static_cast<std::size_t>(k - 1)] = lambda_dagger(row.tuple, k, cache);
      row.lambda_ddagger[static_cast<std::size_t>(k - 1)] = lambda_ddagger(row.tuple, k, cache);
    }
    row.risk_dagger = *std::max_element(row.lambda_dagger.begin(), row.lambda_dagger.end());
    row.risk_ddagger = row.lambda_ddagger[0] + row.lambda_ddagger[1] + row.lambda_ddagger[2];
  });
  return table;
}

SmlResult select_from_cache(const SplitCache& cache, const PseudoRiskTable& table, Criterion criterion) {
  if (table.empty()) throw Error(ErrorCode::InvalidArgument, "empty pseudo-risk table");
  auto risk = [&](const PseudoRiskRow& row) { return criterion == Criterion::dagger ? row.risk_dagger : row.risk_ddagger; };
  // Table rows are in lexicographic tuple order, so the first minimum wins ties.
  std::size_t best = 0;
  for (std::size_t i = 1; i < table.size(); ++i)
    if (risk(table[i]) < risk(table[best])) best = i;

  SmlResult res;
  res.selected = table[best].tuple;
  res.table = table;
  const std::size_t idx = cache.index(res.selected);
  double est = 0.0, sd = 0.0;
  std::size_t nv = 0;
  Diagnostics diag;
  for (int s = 0; s < cache.S; ++s) {
    const auto su = static_cast<std::size_t>(s);
    est += cache.means[su][idx];
    const Eigen::VectorXd& v = cache.values[su][idx];
    sd += sample_sd(std::vector<double>(v.data(), v.data() + v.size()));
    nv = static_cast<std::size_t>(v.size());
    if (!cache.trims.empty()) diag.trim += cache.trims[su][idx];
    if (!cache.winsorized.empty()) diag.winsorized += cache.winsorized[su][idx];
  }
  est /= cache.S;
  sd /= cache.S;
  const EstimatorId id = criterion == Criterion::dagger ? EstimatorId::sml_dagger : EstimatorId::sml_ddagger;
  res.report = EstimateReport::make(id, est, nv ? sd / std::sqrt(static_cast<double>(nv)) : 0.0);
  res.report.label = format_tuple(res.selected);
  diag.post_selection = true;
  diag.notes.push_back("standard error ignores the selection step");
  res.report.diagnostics = diag;
  return res;
}

SmlResult select_and_estimate(const Dataset& data, const CandidateLists& candidates, const SmlConfig& config,
                              Criterion criterion) {
  const SplitCache cache = build_cache(data, candidates, config);
  return select_from_cache(cache, compute_risk_table(cache), criterion);
}

}  // namespace ivmr
