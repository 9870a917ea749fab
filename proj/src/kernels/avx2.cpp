#include <immintrin.h>

#include <bit>
#include <cmath>

#include "ivmr/kernels.hpp"

namespace ivmr::kernels::avx2 {

bool compiled() { return true; }

namespace {
inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}
inline unsigned lanes(__m256d mask) { return static_cast<unsigned>(std::popcount(static_cast<unsigned>(_mm256_movemask_pd(mask)))); }
}  // namespace

double dot(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    acc1 = _mm256_add_pd(acc1, _mm256_mul_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4)));
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

double sum(const double* x, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
    acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x + i + 4));
  }
  for (; i + 4 <= n; i += 4) acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += x[i];
  return s;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_mul_pd(va, _mm256_loadu_pd(x + i))));
  for (; i < n; ++i) y[i] += a * x[i];
}

double weighted_dot(const double* w, const double* x, const double* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d wx = _mm256_mul_pd(_mm256_loadu_pd(w + i), _mm256_loadu_pd(x + i));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(wx, _mm256_loadu_pd(y + i)));
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += (w[i] * x[i]) * y[i];
  return s;
}

TrimCounts phi_eff(const PhiInputs& in, const TrimThresholds& trim, double* out) {
  TrimCounts counts;
  const __m256d lo = _mm256_set1_pd(trim.pi_clamp);
  const __m256d hi = _mm256_set1_pd(1.0 - trim.pi_clamp);
  const __m256d floor = _mm256_set1_pd(trim.denom_floor);
  const __m256d neg_floor = _mm256_set1_pd(-trim.denom_floor);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d minus_one = _mm256_set1_pd(-1.0);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d abs_mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));

  std::size_t i = 0;
  for (; i + 4 <= in.n; i += 4) {
    __m256d p1 = _mm256_loadu_pd(in.pi1 + i);
    const __m256d below = _mm256_cmp_pd(p1, lo, _CMP_LT_OQ);
    const __m256d above = _mm256_cmp_pd(p1, hi, _CMP_GT_OQ);
    counts.pi_clamped += lanes(_mm256_or_pd(below, above));
    p1 = _mm256_blendv_pd(p1, lo, below);
    p1 = _mm256_blendv_pd(p1, hi, above);

    const __m256d zm = _mm256_cmp_pd(_mm256_loadu_pd(in.z + i), zero, _CMP_NEQ_UQ);
    const __m256d pz = _mm256_blendv_pd(_mm256_sub_pd(one, p1), p1, zm);

    const __m256d mu1 = _mm256_loadu_pd(in.mu1 + i);
    const __m256d mu0 = _mm256_loadu_pd(in.mu0 + i);
    const __m256d s1 = _mm256_mul_pd(mu1, _mm256_sub_pd(one, mu1));
    const __m256d s0 = _mm256_mul_pd(mu0, _mm256_sub_pd(one, mu0));
    __m256d d = _mm256_sub_pd(s1, s0);
    const __m256d small = _mm256_cmp_pd(_mm256_and_pd(d, abs_mask), floor, _CMP_LT_OQ);
    counts.denom_floored += lanes(small);
    const __m256d repl = _mm256_blendv_pd(neg_floor, floor, _mm256_cmp_pd(d, zero, _CMP_GE_OQ));
    d = _mm256_blendv_pd(d, repl, small);

    const __m256d muz = _mm256_blendv_pd(mu0, mu1, zm);
    const __m256d a = _mm256_loadu_pd(in.a + i);
    const __m256d delta = _mm256_loadu_pd(in.delta + i);
    const __m256d resid = _mm256_sub_pd(_mm256_sub_pd(_mm256_loadu_pd(in.y + i), _mm256_mul_pd(delta, a)),
                                        _mm256_loadu_pd(in.tau + i));
    const __m256d num = _mm256_sub_pd(_mm256_mul_pd(_mm256_sub_pd(a, muz), resid), _mm256_loadu_pd(in.rho + i));
    const __m256d sgn = _mm256_blendv_pd(minus_one, one, zm);
    const __m256d val = _mm256_add_pd(_mm256_div_pd(_mm256_mul_pd(sgn, num), _mm256_mul_pd(pz, d)), delta);
    _mm256_storeu_pd(out + i, val);
  }
  if (i < in.n) {
    PhiInputs tail = in;
    tail.y += i;
    tail.a += i;
    tail.z += i;
    tail.pi1 += i;
    tail.mu0 += i;
    tail.mu1 += i;
    tail.delta += i;
    tail.tau += i;
    tail.rho += i;
    tail.n = in.n - i;
    counts += scalar::phi_eff(tail, trim, out + i);
  }
  return counts;
}

}  // namespace ivmr::kernels::avx2
