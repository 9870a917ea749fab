#include <cmath>

#include "ivmr/kernels.hpp"

namespace ivmr::kernels::scalar {

double dot(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

double sum(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double weighted_dot(const double* w, const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += (w[i] * x[i]) * y[i];
  return s;
}

TrimCounts phi_eff(const PhiInputs& in, const TrimThresholds& trim, double* out) {
  TrimCounts counts;
  const double lo = trim.pi_clamp, hi = 1.0 - trim.pi_clamp, floor = trim.denom_floor;
  for (std::size_t i = 0; i < in.n; ++i) {
    double p1 = in.pi1[i];
    if (p1 < lo) {
      p1 = lo;
      ++counts.pi_clamped;
    } else if (p1 > hi) {
      p1 = hi;
      ++counts.pi_clamped;
    }
    const bool one = in.z[i] != 0.0;
    const double pz = one ? p1 : 1.0 - p1;
    const double s1 = in.mu1[i] * (1.0 - in.mu1[i]);
    const double s0 = in.mu0[i] * (1.0 - in.mu0[i]);
    double d = s1 - s0;
    if (std::abs(d) < floor) {
      d = d >= 0.0 ? floor : -floor;
      ++counts.denom_floored;
    }
    const double muz = one ? in.mu1[i] : in.mu0[i];
    const double num = (in.a[i] - muz) * ((in.y[i] - in.delta[i] * in.a[i]) - in.tau[i]) - in.rho[i];
    const double sgn = one ? 1.0 : -1.0;
    out[i] = sgn * num / (pz * d) + in.delta[i];
  }
  return counts;
}

}  // namespace ivmr::kernels::scalar
