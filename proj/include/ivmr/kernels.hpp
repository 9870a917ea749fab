#pragma once

#include <cstddef>
#include <optional>
#include <string_view>

namespace ivmr::kernels {

enum class Isa { scalar, avx2 };

std::string_view to_string(Isa isa);

/// Best ISA supported by both the build and the running CPU.
Isa detected_isa();
/// Detected ISA unless overridden by force_isa().
Isa active_isa();
/// Pins dispatch to `isa` (nullopt restores detection). Forcing an ISA the
/// CPU lacks throws InvalidArgument.
void force_isa(std::optional<Isa> isa);

double dot(const double* x, const double* y, std::size_t n);
double sum(const double* x, std::size_t n);
/// y += a * x
void axpy(double a, const double* x, double* y, std::size_t n);
/// sum_i w_i x_i y_i
double weighted_dot(const double* w, const double* x, const double* y, std::size_t n);

struct PhiInputs {
  const double* y = nullptr;
  const double* a = nullptr;
  const double* z = nullptr;  // 0.0 or 1.0
  const double* pi1 = nullptr;
  const double* mu0 = nullptr;
  const double* mu1 = nullptr;
  const double* delta = nullptr;
  const double* tau = nullptr;  // tau(z_i, x_i) at the observed instrument
  const double* rho = nullptr;
  std::size_t n = 0;
};

struct TrimThresholds {
  double pi_clamp = 0.01;
  double denom_floor = 1e-3;
};

struct TrimCounts {
  std::size_t pi_clamped = 0;
  std::size_t denom_floored = 0;

  TrimCounts& operator+=(const TrimCounts& o) {
    pi_clamped += o.pi_clamped;
    denom_floored += o.denom_floored;
    return *this;
  }
};

/// Efficient influence function values, one per row. Elementwise results are
/// bit-identical across ISAs.
TrimCounts phi_eff(const PhiInputs& in, const TrimThresholds& trim, double* out);

namespace scalar {
double dot(const double* x, const double* y, std::size_t n);
double sum(const double* x, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
double weighted_dot(const double* w, const double* x, const double* y, std::size_t n);
TrimCounts phi_eff(const PhiInputs& in, const TrimThresholds& trim, double* out);
}  // namespace scalar

namespace avx2 {
/// False when the build has no AVX2 variant.
bool compiled();
double dot(const double* x, const double* y, std::size_t n);
double sum(const double* x, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
double weighted_dot(const double* w, const double* x, const double* y, std::size_t n);
TrimCounts phi_eff(const PhiInputs& in, const TrimThresholds& trim, double* out);
}  // namespace avx2

}  // namespace ivmr::kernels
