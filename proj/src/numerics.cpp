#include "ivmr/numerics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <thread>

#include "ivmr/error.hpp"

namespace ivmr {

void SolverConfig::validate() const {
  if (!(tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "solver tol must be positive");
  if (max_iter < 1) throw Error(ErrorCode::InvalidArgument, "solver max_iter must be >= 1");
  if (!(jacobian_step > 0.0)) throw Error(ErrorCode::InvalidArgument, "jacobian_step must be positive");
  if (!(min_step > 0.0 && min_step < 1.0)) throw Error(ErrorCode::InvalidArgument, "min_step must be in (0,1)");
}

namespace {

constexpr double kSeparationNorm = 30.0;

double log1pexp(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double weighted_loglik(const Eigen::VectorXd& eta, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) ll += w(i) * (y(i) * eta(i) - log1pexp(eta(i)));
  return ll;
}

}  // namespace

FitResult fit_logistic(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                       const SolverConfig& config) {
  return fit_logistic(design, y, Eigen::VectorXd::Ones(y.size()), config);
}

FitResult fit_logistic(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& weights, const SolverConfig& config) {
  config.validate();
  const Eigen::Index n = design.rows(), q = design.cols();
  if (y.size() != n || weights.size() != n)
    throw Error(ErrorCode::InvalidArgument, "logistic fit: length mismatch");
  if (n < q) throw Error(ErrorCode::TooFewObservations, "logistic fit needs n >= q");
  for (Eigen::Index j = 0; j < q; ++j)
    if (design.col(j).cwiseAbs().maxCoeff() == 0.0)
      throw Error(ErrorCode::SingularWeightedSystem, "design column " + std::to_string(j) + " is all zero");
  const double wsum = weights.sum();
  if (!(wsum > 0.0)) throw Error(ErrorCode::InvalidArgument, "logistic fit: weights sum to zero");

  FitResult r;
  r.coefficients = Eigen::VectorXd::Zero(q);
  Eigen::VectorXd eta = Eigen::VectorXd::Zero(n);
  double ll = weighted_loglik(eta, y, weights);
  for (int it = 0; it <= config.max_iter; ++it) {
    Eigen::VectorXd p = eta.unaryExpr([](double e) { return expit(e); });
    Eigen::VectorXd grad = design.transpose() * (weights.cwiseProduct(y - p)) / wsum;
    r.final_gradient_norm = grad.cwiseAbs().maxCoeff();
    r.iterations = it;
    if (r.final_gradient_norm <= config.tol) {
      r.converged = true;
      return r;
    }
    if (it == config.max_iter) break;
    Eigen::VectorXd wv = weights.cwiseProduct(p.cwiseProduct(Eigen::VectorXd::Ones(n) - p)) / wsum;
    Eigen::MatrixXd info = design.transpose() * wv.asDiagonal() * design;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-14)
      throw Error(ErrorCode::SingularWeightedSystem, "weighted information matrix is singular");
    Eigen::VectorXd step = ldlt.solve(grad);
    double t = 1.0;
    Eigen::VectorXd trial;
    double trial_ll = 0.0;
    for (;;) {
      trial = r.coefficients + t * step;
      Eigen::VectorXd trial_eta = design * trial;
      trial_ll = weighted_loglik(trial_eta, y, weights);
      if ((std::isfinite(trial_ll) && trial_ll >= ll - 1e-12 * std::abs(ll)) || t <= config.min_step) {
        eta = std::move(trial_eta);
        break;
      }
      t *= 0.5;
    }
    r.coefficients = trial;
    ll = trial_ll;
    if (r.coefficients.norm() > kSeparationNorm) {
      r.separation_detected = true;
      p = eta.unaryExpr([](double e) { return expit(e); });
      grad = design.transpose() * (weights.cwiseProduct(y - p)) / wsum;
      r.final_gradient_norm = grad.cwiseAbs().maxCoeff();
      r.iterations = it + 1;
      return r;
    }
  }
  return r;
}

FitResult fit_ols(const Eigen::MatrixXd& design, const Eigen::VectorXd& y) {
  if (design.rows() != y.size()) throw Error(ErrorCode::InvalidArgument, "ols: length mismatch");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (design.rows() < design.cols() || qr.rank() < design.cols())
    throw Error(ErrorCode::RankDeficient, "design rank " + std::to_string(qr.rank()) + " < " +
                                              std::to_string(design.cols()));
  FitResult r;
  r.coefficients = qr.solve(y);
  r.converged = true;
  r.iterations = 1;
  r.final_gradient_norm = (design.transpose() * (y - design * r.coefficients)).cwiseAbs().maxCoeff();
  return r;
}

namespace {

Eigen::MatrixXd forward_jacobian(const VectorFn& g, const Eigen::VectorXd& x, const Eigen::VectorXd& gx,
                                 double step) {
  Eigen::MatrixXd j(gx.size(), x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index c = 0; c < x.size(); ++c) {
    const double h = step * std::max(1.0, std::abs(x(c)));
    xp(c) = x(c) + h;
    Eigen::VectorXd gp = g(xp);
    xp(c) = x(c);
    if (!gp.allFinite()) throw Error(ErrorCode::NonFiniteEvaluation, "moment not finite near solution");
    j.col(c) = (gp - gx) / h;
  }
  return j;
}

bool usable(const Eigen::PartialPivLU<Eigen::MatrixXd>& lu, const Eigen::MatrixXd& j) {
  if (j.size() == 0) return false;
  const double rc = lu.rcond();
  return std::isfinite(rc) && rc > 1e-13;
}

}  // namespace

FitResult solve_moment_system(const VectorFn& g, const Eigen::VectorXd& init, const SolverConfig& config) {
  config.validate();
  FitResult r;
  Eigen::VectorXd x = init;
  Eigen::VectorXd gx = g(x);
  if (gx.size() != x.size()) throw Error(ErrorCode::InvalidArgument, "moment system is not square");
  if (!gx.allFinite()) throw Error(ErrorCode::NonFiniteEvaluation, "moment not finite at start");

  Eigen::MatrixXd jac;
  bool broyden = false;
  for (int it = 0;; ++it) {
    r.iterations = it;
    r.final_gradient_norm = gx.size() ? gx.cwiseAbs().maxCoeff() : 0.0;
    if (r.final_gradient_norm <= config.tol) {
      r.coefficients = x;
      r.converged = true;
      return r;
    }
    if (it >= config.max_iter)
      throw Error(ErrorCode::NoConvergence, "moment max-norm " + std::to_string(r.final_gradient_norm) +
                                                " after " + std::to_string(it) + " iterations");

    if (!broyden) {
      Eigen::MatrixXd fresh = forward_jacobian(g, x, gx, config.jacobian_step);
      Eigen::PartialPivLU<Eigen::MatrixXd> lu(fresh);
      if (!usable(lu, fresh)) {
        fresh = forward_jacobian(g, x, gx, config.jacobian_step * 10.0);
        lu.compute(fresh);
        if (!usable(lu, fresh)) {
          if (jac.size() == 0) throw Error(ErrorCode::SingularJacobian, "jacobian singular at start");
          broyden = true;
        } else {
          jac = std::move(fresh);
        }
      } else {
        jac = std::move(fresh);
      }
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
    if (!usable(lu, jac)) throw Error(ErrorCode::SingularJacobian, "jacobian singular");
    Eigen::VectorXd dx = -lu.solve(gx);

    const double base = gx.squaredNorm();
    double t = 1.0;
    Eigen::VectorXd xt, gt;
    for (;;) {
      xt = x + t * dx;
      gt = g(xt);
      if ((gt.allFinite() && gt.squaredNorm() < base) || t <= config.min_step) break;
      t *= 0.5;
    }
    if (!gt.allFinite()) throw Error(ErrorCode::NonFiniteEvaluation, "moment not finite along step");
    if (broyden) {
      Eigen::VectorXd s = xt - x, yv = gt - gx;
      const double ss = s.squaredNorm();
      if (ss > 0.0) jac += ((yv - jac * s) * s.transpose()) / ss;
    }
    x = std::move(xt);
    gx = std::move(gt);
  }
}

Eigen::MatrixXd numeric_jacobian(const VectorFn& f, const Eigen::VectorXd& at, double step) {
  if (!(step > 0.0)) throw Error(ErrorCode::InvalidArgument, "jacobian step must be positive");
  Eigen::MatrixXd j;
  Eigen::VectorXd xp = at;
  for (Eigen::Index c = 0; c < at.size(); ++c) {
    const double h = step * std::max(1.0, std::abs(at(c)));
    xp(c) = at(c) + h;
    Eigen::VectorXd fp = f(xp);
    xp(c) = at(c) - h;
    Eigen::VectorXd fm = f(xp);
    xp(c) = at(c);
    if (!fp.allFinite() || !fm.allFinite())
      throw Error(ErrorCode::NonFiniteEvaluation, "function not finite at coordinate " + std::to_string(c));
    if (c == 0) j.resize(fp.size(), at.size());
    j.col(c) = (fp - fm) / (2.0 * h);
  }
  return j;
}

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw Error(ErrorCode::InvalidArgument, "normal_quantile: p outside [0,1]");
  }
  // Acklam's rational approximation.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01, -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5, rr = q * q;
    x = (((((a[0] * rr + a[1]) * rr + a[2]) * rr + a[3]) * rr + a[4]) * rr + a[5]) * q /
        (((((b[0] * rr + b[1]) * rr + b[2]) * rr + b[3]) * rr + b[4]) * rr + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // One Halley step against the erfc-based CDF.
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

double expit(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

double truncated_normal_variance(double sd, double c) {
  const double b = c / sd;
  const double mass = 2.0 * normal_cdf(b) - 1.0;
  return sd * sd * (1.0 - 2.0 * b * normal_pdf(b) / mass);
}

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t s = seed ^ (0xd1b54a32d192ed03ULL * (stream + 1));
  splitmix64(s);
  return splitmix64(s);
}

namespace {
inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
}  // namespace

Rng::Rng(std::uint64_t seed) {
  std::uint64_t st = seed;
  for (auto& s : s_) s = splitmix64(st);
}

std::uint64_t Rng::next() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1p-53; }

double Rng::uniform_open() { return (static_cast<double>(next() >> 12) + 0.5) * 0x1p-52; }

std::size_t Rng::below(std::size_t n) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "Rng::below(0)");
  // Lemire's nearly divisionless method.
  unsigned __int128 m = static_cast<unsigned __int128>(next()) * n;
  auto low = static_cast<std::uint64_t>(m);
  if (low < n) {
    const std::uint64_t threshold = (0 - static_cast<std::uint64_t>(n)) % n;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(next()) * n;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::size_t>(m >> 64);
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

bool Rng::bernoulli(double p) { return uniform() < p; }

std::vector<std::size_t> permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  rng.shuffle(v);
  return v;
}

double sample_truncated_normal(double mean, double sd, double lo, double hi, Rng& rng) {
  if (!(lo < hi)) throw Error(ErrorCode::DegenerateInterval, "truncation interval is empty");
  if (!(sd > 0.0)) throw Error(ErrorCode::DegenerateInterval, "sd must be positive");
  const double fa = normal_cdf((lo - mean) / sd);
  const double fb = normal_cdf((hi - mean) / sd);
  if (!(fb > fa)) throw Error(ErrorCode::DegenerateInterval, "truncation interval has no mass");
  const double u = rng.uniform_open();
  const double x = normal_quantile(fa + u * (fb - fa)) * sd + mean;
  return std::clamp(x, lo, hi);
}

namespace {
std::atomic<unsigned> g_default_threads{1};
}

void set_default_threads(unsigned threads) { g_default_threads = threads == 0 ? 1 : threads; }

unsigned default_threads() { return g_default_threads; }

void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body) {
  if (threads == 0) threads = default_threads();
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex m;
  std::size_t failed_at = n;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(m);
        // Keep the lowest failing index so the rethrown error is schedule-independent.
        if (i < failed_at) {
          failed_at = i;
          failure = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

void CompensatedSum::add(double v) {
  const double t = sum_ + v;
  if (std::abs(sum_) >= std::abs(v))
    c_ += (sum_ - t) + v;
  else
    c_ += (v - t) + sum_;
  sum_ = t;
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  CompensatedSum s;
  for (double x : v) s.add(x);
  return s.value() / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  CompensatedSum s;
  for (double x : v) s.add((x - m) * (x - m));
  return std::sqrt(s.value() / static_cast<double>(v.size() - 1));
}

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace ivmr
