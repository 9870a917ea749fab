#include <atomic>

#include "ivmr/error.hpp"
#include "ivmr/kernels.hpp"

namespace ivmr::kernels {

#ifndef IVMR_HAVE_AVX2
namespace avx2 {
bool compiled() { return false; }
double dot(const double* x, const double* y, std::size_t n) { return scalar::dot(x, y, n); }
double sum(const double* x, std::size_t n) { return scalar::sum(x, n); }
void axpy(double a, const double* x, double* y, std::size_t n) { scalar::axpy(a, x, y, n); }
double weighted_dot(const double* w, const double* x, const double* y, std::size_t n) {
  return scalar::weighted_dot(w, x, y, n);
}
TrimCounts phi_eff(const PhiInputs& in, const TrimThresholds& trim, double* out) {
  return scalar::phi_eff(in, trim, out);
}
}  // namespace avx2
#endif

namespace {

struct Table {
  double (*dot)(const double*, const double*, std::size_t);
  double (*sum)(const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  double (*weighted_dot)(const double*, const double*, const double*, std::size_t);
  TrimCounts (*phi_eff)(const PhiInputs&, const TrimThresholds&, double*);
};

constexpr Table kScalar{scalar::dot, scalar::sum, scalar::axpy, scalar::weighted_dot, scalar::phi_eff};
constexpr Table kAvx2{avx2::dot, avx2::sum, avx2::axpy, avx2::weighted_dot, avx2::phi_eff};

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

// -1: follow detection, otherwise an Isa value.
std::atomic<int> g_forced{-1};

const Table& table() { return active_isa() == Isa::avx2 ? kAvx2 : kScalar; }

}  // namespace

std::string_view to_string(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

Isa detected_isa() {
  static const Isa isa = (avx2::compiled() && cpu_has_avx2()) ? Isa::avx2 : Isa::scalar;
  return isa;
}

Isa active_isa() {
  const int f = g_forced.load(std::memory_order_relaxed);
  return f < 0 ? detected_isa() : static_cast<Isa>(f);
}

void force_isa(std::optional<Isa> isa) {
  if (!isa) {
    g_forced = -1;
    return;
  }
  if (*isa == Isa::avx2 && detected_isa() != Isa::avx2)
    throw Error(ErrorCode::InvalidArgument, "AVX2 kernels unavailable on this build or CPU");
  g_forced = static_cast<int>(*isa);
}

double dot(const double* x, const double* y, std::size_t n) { return table().dot(x, y, n); }
double sum(const double* x, std::size_t n) { return table().sum(x, n); }
void axpy(double a, const double* x, double* y, std::size_t n) { table().axpy(a, x, y, n); }
double weighted_dot(const double* w, const double* x, const double* y, std::size_t n) {
  return table().weighted_dot(w, x, y, n);
}
TrimCounts phi_eff(const PhiInputs& in, const TrimThresholds& trim, double* out) {
  return table().phi_eff(in, trim, out);
}

}  // namespace ivmr::kernels
