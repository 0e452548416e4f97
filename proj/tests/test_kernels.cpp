#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <cstring>
#include <random>
#include <vector>

#include "cablewatch/kernels.hpp"
#include "cablewatch/types.hpp"

using namespace cablewatch;
namespace k = cablewatch::kernels;

namespace {

// Long-double reference reductions. These are the accuracy yardstick: every
// backend must land within a few n*eps of these regardless of its own
// accumulation order.
std::complex<double> dot_oracle(const cvec& a, const cvec& b) {
  long double re = 0.0L, im = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const long double ar = a[i].real(), ai = a[i].imag();
    const long double br = b[i].real(), bi = b[i].imag();
    re += ar * br + ai * bi;
    im += ar * bi - ai * br;
  }
  return {static_cast<double>(re), static_cast<double>(im)};
}

double sum_oracle(const dvec& a) {
  long double acc = 0.0L;
  for (double v : a) acc += v;
  return static_cast<double>(acc);
}

double sum_abs_oracle(const cvec& a) {
  long double acc = 0.0L;
  for (const auto& v : a) acc += std::abs(std::complex<long double>(v.real(), v.imag()));
  return static_cast<double>(acc);
}

cvec random_cvec(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 1.0);
  cvec out(n);
  for (auto& v : out) v = {g(rng), g(rng)};
  return out;
}

dvec random_dvec(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 1.0);
  dvec out(n);
  for (auto& v : out) v = g(rng);
  return out;
}

// Restores whatever backend the process started with, so test cases cannot
// leak a forced backend into each other.
struct BackendGuard {
  k::Backend saved = k::active_backend();
  ~BackendGuard() { k::force_backend(saved); }
};

std::vector<k::Backend> supported_backends() {
  std::vector<k::Backend> out;
  for (k::Backend b : {k::Backend::scalar, k::Backend::avx2, k::Backend::neon}) {
    if (k::backend_supported(b)) out.push_back(b);
  }
  return out;
}

const std::size_t kSizes[] = {0, 1, 2, 3, 4, 5, 7, 8, 13, 31, 64, 257, 1000};

}  // namespace

TEST_CASE("backend names and support") {
  CHECK(std::strcmp(k::to_string(k::Backend::scalar), "scalar") == 0);
  CHECK(std::strcmp(k::to_string(k::Backend::avx2), "avx2") == 0);
  CHECK(std::strcmp(k::to_string(k::Backend::neon), "neon") == 0);
  CHECK(k::backend_supported(k::Backend::scalar));
  CHECK(k::backend_supported(k::active_backend()));
  // avx2 and neon never coexist on one machine.
  CHECK_FALSE((k::backend_supported(k::Backend::avx2) &&
               k::backend_supported(k::Backend::neon)));
}

TEST_CASE("forcing an unsupported backend throws, supported sticks") {
  BackendGuard guard;
  for (k::Backend b : {k::Backend::avx2, k::Backend::neon}) {
    if (!k::backend_supported(b)) {
      CHECK_THROWS_AS(k::force_backend(b), ValidationError);
    }
  }
  k::force_backend(k::Backend::scalar);
  CHECK(k::active_backend() == k::Backend::scalar);
  for (k::Backend b : supported_backends()) {
    k::force_backend(b);
    CHECK(k::active_backend() == b);
  }
}

TEST_CASE("complex_dot matches the long-double oracle on every backend") {
  BackendGuard guard;
  std::mt19937_64 rng(11);
  for (std::size_t n : kSizes) {
    const cvec a = random_cvec(rng, n);
    const cvec b = random_cvec(rng, n);
    const auto want = dot_oracle(a, b);
    // Accumulation-order error is bounded by ~n*eps times the term mass.
    long double mass = 0.0L;
    for (std::size_t i = 0; i < n; ++i) mass += std::abs(a[i]) * std::abs(b[i]);
    const double tol = 1e-12 * (static_cast<double>(mass) + 1.0);
    for (k::Backend be : supported_backends()) {
      k::force_backend(be);
      const auto got = k::complex_dot(a.data(), b.data(), n);
      CAPTURE(k::to_string(be));
      CAPTURE(n);
      CHECK(std::abs(got - want) <= tol);
    }
  }
}

TEST_CASE("complex_dot conjugates its first argument") {
  BackendGuard guard;
  const cvec a{{1.0, 2.0}};
  const cvec b{{3.0, -4.0}};
  // conj(1+2i)*(3-4i) = (1-2i)(3-4i) = 3-4i-6i+8i^2 = -5-10i
  for (k::Backend be : supported_backends()) {
    k::force_backend(be);
    const auto got = k::complex_dot(a.data(), b.data(), 1);
    CHECK(got.real() == doctest::Approx(-5.0));
    CHECK(got.imag() == doctest::Approx(-10.0));
  }
  // Self-dot is the energy: real, nonnegative.
  std::mt19937_64 rng(5);
  const cvec v = random_cvec(rng, 33);
  for (k::Backend be : supported_backends()) {
    k::force_backend(be);
    const auto e = k::complex_dot(v.data(), v.data(), v.size());
    CHECK(e.real() >= 0.0);
    CHECK(std::abs(e.imag()) <= 1e-12 * e.real());
  }
}

TEST_CASE("abs_c128 is elementwise |z| on every backend") {
  BackendGuard guard;
  std::mt19937_64 rng(23);
  for (std::size_t n : kSizes) {
    const cvec a = random_cvec(rng, n);
    for (k::Backend be : supported_backends()) {
      k::force_backend(be);
      dvec out(n, -1.0);
      k::abs_c128(a.data(), out.data(), n);
      for (std::size_t i = 0; i < n; ++i) {
        const double want = std::abs(a[i]);
        CAPTURE(k::to_string(be));
        CHECK(out[i] == doctest::Approx(want).epsilon(1e-14));
      }
    }
  }
}

TEST_CASE("sum reductions match oracles on every backend") {
  BackendGuard guard;
  std::mt19937_64 rng(37);
  for (std::size_t n : kSizes) {
    const cvec a = random_cvec(rng, n);
    const dvec d = random_dvec(rng, n);
    const double want_abs = sum_abs_oracle(a);
    const double want_sum = sum_oracle(d);
    long double mass = 0.0L;
    for (double v : d) mass += std::fabs(v);
    const double tol_sum = 1e-12 * (static_cast<double>(mass) + 1.0);
    const double tol_abs = 1e-12 * (want_abs + 1.0);
    for (k::Backend be : supported_backends()) {
      k::force_backend(be);
      CAPTURE(k::to_string(be));
      CAPTURE(n);
      CHECK(std::fabs(k::sum_abs_c128(a.data(), n) - want_abs) <= tol_abs);
      CHECK(std::fabs(k::sum_f64(d.data(), n) - want_sum) <= tol_sum);
    }
  }
}

TEST_CASE("all supported backends agree pairwise on one large input") {
  BackendGuard guard;
  std::mt19937_64 rng(71);
  const std::size_t n = 4097;  // odd remainder exercises every tail path
  const cvec a = random_cvec(rng, n);
  const cvec b = random_cvec(rng, n);
  const dvec d = random_dvec(rng, n);

  k::force_backend(k::Backend::scalar);
  const auto dot0 = k::complex_dot(a.data(), b.data(), n);
  const double sum0 = k::sum_f64(d.data(), n);
  const double abs0 = k::sum_abs_c128(a.data(), n);
  dvec mag0(n);
  k::abs_c128(a.data(), mag0.data(), n);

  for (k::Backend be : supported_backends()) {
    if (be == k::Backend::scalar) continue;
    k::force_backend(be);
    CAPTURE(k::to_string(be));
    CHECK(std::abs(k::complex_dot(a.data(), b.data(), n) - dot0) <= 1e-9);
    CHECK(std::fabs(k::sum_f64(d.data(), n) - sum0) <= 1e-9);
    CHECK(std::fabs(k::sum_abs_c128(a.data(), n) - abs0) <= 1e-9);
    dvec mag(n);
    k::abs_c128(a.data(), mag.data(), n);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(mag[i] == doctest::Approx(mag0[i]).epsilon(1e-14));
    }
  }
}
