#include <doctest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "ivmr/error.hpp"
#include "ivmr/kernels.hpp"
#include "ivmr/numerics.hpp"

using namespace ivmr;
namespace k = ivmr::kernels;

namespace {

struct PhiBatch {
  std::vector<double> y, a, z, pi1, mu0, mu1, delta, tau, rho;

  explicit PhiBatch(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
      y.push_back(3.0 * rng.normal());
      a.push_back(rng.bernoulli(0.5));
      z.push_back(rng.bernoulli(0.4));
      // Wide ranges so both trims fire on some rows.
      pi1.push_back(rng.uniform() * 1.04 - 0.02);
      const double m0 = rng.uniform();
      mu0.push_back(m0);
      mu1.push_back(i % 7 == 0 ? m0 + 1e-5 : rng.uniform());
      delta.push_back(rng.normal());
      tau.push_back(rng.normal());
      rho.push_back(0.1 * rng.normal());
    }
  }
  k::PhiInputs inputs() const {
    return {y.data(), a.data(), z.data(), pi1.data(), mu0.data(), mu1.data(), delta.data(), tau.data(), rho.data(),
            y.size()};
  }
};

}  // namespace

TEST_CASE("isa dispatch reports a usable variant") {
  const k::Isa d = k::detected_isa();
  CHECK((d == k::Isa::scalar || k::avx2::compiled()));
  k::force_isa(k::Isa::scalar);
  CHECK(k::active_isa() == k::Isa::scalar);
  k::force_isa(std::nullopt);
  CHECK(k::active_isa() == d);
  if (d == k::Isa::scalar) {
    bool threw = false;
    try {
      k::force_isa(k::Isa::avx2);
    } catch (const Error& e) {
      threw = e.code() == ErrorCode::InvalidArgument;
    }
    CHECK(threw);
    k::force_isa(std::nullopt);
  }
}

TEST_CASE("phi_eff kernel: avx2 is bit-identical to scalar") {
  if (k::detected_isa() != k::Isa::avx2) {
    MESSAGE("AVX2 unavailable; equivalence test skipped");
    return;
  }
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 17u, 1000u, 1003u}) {
    const PhiBatch b(n, 40 + n);
    std::vector<double> s(n), v(n);
    const auto cs = k::scalar::phi_eff(b.inputs(), {}, s.data());
    const auto cv = k::avx2::phi_eff(b.inputs(), {}, v.data());
    CHECK(cs.pi_clamped == cv.pi_clamped);
    CHECK(cs.denom_floored == cv.denom_floored);
    CHECK(std::memcmp(s.data(), v.data(), n * sizeof(double)) == 0);
    if (n == 1000) {
      CHECK(cs.pi_clamped > 0);
      CHECK(cs.denom_floored > 0);
    }
  }
}

TEST_CASE("reduction kernels agree across isas") {
  if (k::detected_isa() != k::Isa::avx2) {
    MESSAGE("AVX2 unavailable; equivalence test skipped");
    return;
  }
  Rng rng(8);
  for (std::size_t n = 0; n <= 40; ++n) {
    std::vector<double> x(n), y(n), w(n);
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rng.normal();
      y[i] = rng.normal();
      w[i] = rng.uniform();
      scale += std::abs(x[i] * y[i]) + std::abs(x[i]);
    }
    const double tol = 1e-14 * (1.0 + scale);
    CHECK(std::abs(k::scalar::dot(x.data(), y.data(), n) - k::avx2::dot(x.data(), y.data(), n)) <= tol);
    CHECK(std::abs(k::scalar::sum(x.data(), n) - k::avx2::sum(x.data(), n)) <= tol);
    CHECK(std::abs(k::scalar::weighted_dot(w.data(), x.data(), y.data(), n) -
                   k::avx2::weighted_dot(w.data(), x.data(), y.data(), n)) <= tol);
    std::vector<double> ys = y, yv = y;
    k::scalar::axpy(0.37, x.data(), ys.data(), n);
    k::avx2::axpy(0.37, x.data(), yv.data(), n);
    CHECK(ys == yv);
  }
}

TEST_CASE("dispatched kernels follow the forced isa") {
  const PhiBatch b(257, 5);
  std::vector<double> ref(257), out(257);
  k::scalar::phi_eff(b.inputs(), {}, ref.data());
  k::force_isa(k::Isa::scalar);
  k::phi_eff(b.inputs(), {}, out.data());
  k::force_isa(std::nullopt);
  CHECK(ref == out);
  k::phi_eff(b.inputs(), {}, out.data());
  CHECK(ref == out);
}

TEST_CASE("scalar phi_eff matches the written-out formula") {
  const PhiBatch b(200, 12);
  std::vector<double> out(200);
  k::TrimThresholds t;
  k::scalar::phi_eff(b.inputs(), t, out.data());
  for (std::size_t i = 0; i < 200; ++i) {
    const double p1 = std::clamp(b.pi1[i], t.pi_clamp, 1.0 - t.pi_clamp);
    const double pz = b.z[i] != 0.0 ? p1 : 1.0 - p1;
    double d = b.mu1[i] * (1 - b.mu1[i]) - b.mu0[i] * (1 - b.mu0[i]);
    if (std::abs(d) < t.denom_floor) d = std::copysign(t.denom_floor, d);
    const double muz = b.z[i] != 0.0 ? b.mu1[i] : b.mu0[i];
    const double expect =
        (2 * b.z[i] - 1) * ((b.a[i] - muz) * (b.y[i] - b.delta[i] * b.a[i] - b.tau[i]) - b.rho[i]) / (pz * d) +
        b.delta[i];
    CHECK(out[i] == doctest::Approx(expect).epsilon(1e-12));
  }
}
