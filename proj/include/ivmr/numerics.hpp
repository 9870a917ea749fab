#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

namespace ivmr {

struct SolverConfig {
  double tol = 1e-8;          // max-abs moment value (or gradient for GLM fits)
  int max_iter = 100;
  double jacobian_step = 1e-6;  // relative
  double min_step = 0x1p-20;    // line-search halving floor

  void validate() const;
};

struct FitResult {
  Eigen::VectorXd coefficients;
  bool converged = false;
  int iterations = 0;
  double final_gradient_norm = 0.0;
  bool separation_detected = false;
};

using VectorFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// Binomial maximum likelihood by IRLS. Gradient reported as the max-norm of
/// design'(y - p) / n.
FitResult fit_logistic(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                       const SolverConfig& config = {});

/// Weighted variant used by the penalized learners; weights must be non-negative.
FitResult fit_logistic(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& weights, const SolverConfig& config);

FitResult fit_ols(const Eigen::MatrixXd& design, const Eigen::VectorXd& y);

/// Damped Newton on g(psi) = 0 with a forward-difference Jacobian.
FitResult solve_moment_system(const VectorFn& g, const Eigen::VectorXd& init,
                              const SolverConfig& config = {});

/// Central differences, per-coordinate step = step * max(1, |at_j|).
Eigen::MatrixXd numeric_jacobian(const VectorFn& f, const Eigen::VectorXd& at, double step);

double normal_pdf(double x);
double normal_cdf(double x);
double normal_quantile(double p);
double expit(double x);
double logit(double p);

/// Variance of N(0, sd^2) truncated to [-c, c].
double truncated_normal_variance(double sd, double c);

std::uint64_t splitmix64(std::uint64_t& state);
/// Independent stream seed for (seed, stream) pairs.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// xoshiro256** with splitmix64 seeding.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on the open interval (0, 1).
  double uniform_open();
  /// Uniform integer in [0, n).
  std::size_t below(std::size_t n);
  double normal();
  bool bernoulli(double p);

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::vector<std::size_t> permutation(std::size_t n, Rng& rng);

double sample_truncated_normal(double mean, double sd, double lo, double hi, Rng& rng);

/// Runs body(i) for i in [0, n) on up to `threads` workers (0 = process default).
/// Each index runs exactly once; callers write results into slot i so the
/// output never depends on scheduling.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& body);

/// Process-wide default used when callers pass threads = 0.
void set_default_threads(unsigned threads);
unsigned default_threads();

/// Neumaier compensated sum.
class CompensatedSum {
 public:
  void add(double v);
  double value() const { return sum_ + c_; }

 private:
  double sum_ = 0.0;
  double c_ = 0.0;
};

double mean(const std::vector<double>& v);
double sample_sd(const std::vector<double>& v);
double median(std::vector<double> v);
/// Linear-interpolation quantile, q in [0, 1].
double quantile(std::vector<double> v, double q);

}  // namespace ivmr
