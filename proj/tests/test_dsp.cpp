#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <vector>

#include "cablewatch/dsp.hpp"
#include "cablewatch/types.hpp"

using namespace cablewatch;

namespace {

// O(n^2) direct DFT in long double. The fast transform is tested against
// this, never against itself.
cvec naive_dft(const cvec& x, bool inverse) {
  const std::size_t n = x.size();
  const long double sign = inverse ? 1.0L : -1.0L;
  cvec out(n);
  for (std::size_t m = 0; m < n; ++m) {
    long double re = 0.0L, im = 0.0L;
    for (std::size_t k = 0; k < n; ++k) {
      const long double ang = sign * 2.0L * std::numbers::pi_v<long double> *
                              static_cast<long double>(m) * static_cast<long double>(k) /
                              static_cast<long double>(n);
      const long double c = std::cos(ang), s = std::sin(ang);
      re += x[k].real() * c - x[k].imag() * s;
      im += x[k].real() * s + x[k].imag() * c;
    }
    if (inverse) {
      re /= static_cast<long double>(n);
      im /= static_cast<long double>(n);
    }
    out[m] = {static_cast<double>(re), static_cast<double>(im)};
  }
  return out;
}

cvec random_cvec(std::mt19937_64& rng, std::size_t n) {
  std::normal_distribution<double> g(0.0, 1.0);
  cvec out(n);
  for (auto& v : out) v = {g(rng), g(rng)};
  return out;
}

double max_err(const cvec& a, const cvec& b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("power-of-two helpers") {
  CHECK_FALSE(dsp::is_pow2(0));
  CHECK(dsp::is_pow2(1));
  CHECK(dsp::is_pow2(2));
  CHECK_FALSE(dsp::is_pow2(3));
  CHECK(dsp::is_pow2(4096));
  CHECK_FALSE(dsp::is_pow2(4097));
  CHECK(dsp::next_pow2(0) == 1);
  CHECK(dsp::next_pow2(1) == 1);
  CHECK(dsp::next_pow2(2) == 2);
  CHECK(dsp::next_pow2(3) == 4);
  CHECK(dsp::next_pow2(4096) == 4096);
  CHECK(dsp::next_pow2(4097) == 8192);
}

TEST_CASE("fft matches the direct DFT both directions") {
  std::mt19937_64 rng(3);
  for (std::size_t n : {1u, 2u, 4u, 8u, 16u, 128u, 512u}) {
    const cvec x = random_cvec(rng, n);
    for (bool inverse : {false, true}) {
      cvec got = x;
      dsp::fft(got, inverse);
      const cvec want = naive_dft(x, inverse);
      CAPTURE(n);
      CAPTURE(inverse);
      CHECK(max_err(got, want) <= 1e-10 * static_cast<double>(n));
    }
  }
}

TEST_CASE("fft rejects sizes that are not a power of two") {
  cvec z(3, cplx(1.0, 0.0));
  CHECK_THROWS_AS(dsp::fft(z, false), ValidationError);
  cvec empty;
  CHECK_THROWS_AS(dsp::fft(empty, false), ValidationError);
}

TEST_CASE("fft_padded equals the DFT of the zero-padded input") {
  std::mt19937_64 rng(9);
  const cvec x = random_cvec(rng, 5);
  const std::size_t n = 16;
  cvec padded = x;
  padded.resize(n, cplx(0.0, 0.0));
  CHECK(max_err(dsp::fft_padded(x, n), naive_dft(padded, false)) <= 1e-11);
  CHECK_THROWS_AS(dsp::fft_padded(x, 4), ValidationError);   // too small
  CHECK_THROWS_AS(dsp::fft_padded(x, 12), ValidationError);  // not a power of two
}

TEST_CASE("ifft inverts fft exactly to rounding") {
  std::mt19937_64 rng(17);
  const cvec x = random_cvec(rng, 256);
  cvec spec = x;
  dsp::fft(spec, false);
  CHECK(max_err(dsp::ifft(std::move(spec)), x) <= 1e-12);
}

TEST_CASE("Parseval holds") {
  std::mt19937_64 rng(29);
  const std::size_t n = 1024;
  const cvec x = random_cvec(rng, n);
  cvec spec = x;
  dsp::fft(spec, false);
  long double et = 0.0L, ef = 0.0L;
  for (const auto& v : x) et += std::norm(v);
  for (const auto& v : spec) ef += std::norm(v);
  ef /= static_cast<long double>(n);
  CHECK(static_cast<double>(std::fabs(et - ef)) <= 1e-9 * static_cast<double>(et));
}

TEST_CASE("delta input yields unit-magnitude twiddle spectrum") {
  const std::size_t n = 64, pos = 5;
  cvec x(n, cplx(0.0, 0.0));
  x[pos] = 1.0;
  dsp::fft(x, false);
  for (std::size_t m = 0; m < n; ++m) {
    const double ang = -2.0 * std::numbers::pi * static_cast<double>(m * pos) /
                       static_cast<double>(n);
    CHECK(std::abs(x[m] - std::polar(1.0, ang)) <= 1e-12);
  }
}

TEST_CASE("half_hann tapers from one to zero") {
  const auto w = dsp::half_hann(33);
  CHECK(w.front() == doctest::Approx(1.0));
  CHECK(w.back() == doctest::Approx(0.0));
  CHECK(w[16] == doctest::Approx(0.5));
  for (std::size_t i = 1; i < w.size(); ++i) CHECK(w[i] <= w[i - 1]);
  CHECK_THROWS_AS(dsp::half_hann(1), ValidationError);
}

TEST_CASE("rng is deterministic per seed and splits into distinct streams") {
  dsp::Rng a(42), b(42), c(43);
  bool identical = true, differs = false;
  for (int i = 0; i < 1000; ++i) {
    const auto va = a.next_u64();
    identical = identical && (va == b.next_u64());
    differs = differs || (va != c.next_u64());
  }
  CHECK(identical);
  CHECK(differs);

  const auto s0 = dsp::Rng::derive(7, 0);
  const auto s1 = dsp::Rng::derive(7, 1);
  const auto s0b = dsp::Rng::derive(7, 0);
  CHECK(s0 == s0b);
  CHECK(s0 != s1);
  CHECK(dsp::Rng::derive(8, 0) != s0);
}

TEST_CASE("uniform stays in [0,1) and fills the interval") {
  dsp::Rng r(123);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo < 0.01);
  CHECK(hi > 0.99);
}

TEST_CASE("gaussian moments") {
  dsp::Rng r(7);
  const int n = 200000;
  long double sum = 0.0L, sum2 = 0.0L;
  for (int i = 0; i < n; ++i) {
    const double g = r.gaussian();
    sum += g;
    sum2 += g * g;
  }
  const double mean = static_cast<double>(sum) / n;
  const double var = static_cast<double>(sum2) / n - mean * mean;
  CHECK(std::fabs(mean) < 0.01);
  CHECK(var == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("cgaussian splits variance evenly across re and im") {
  dsp::Rng r(55);
  const double var = 0.25;
  const int n = 200000;
  long double sre2 = 0.0L, sim2 = 0.0L, cross = 0.0L;
  for (int i = 0; i < n; ++i) {
    const cplx z = r.cgaussian(var);
    sre2 += z.real() * z.real();
    sim2 += z.imag() * z.imag();
    cross += z.real() * z.imag();
  }
  CHECK(static_cast<double>(sre2) / n == doctest::Approx(var / 2).epsilon(0.03));
  CHECK(static_cast<double>(sim2) / n == doctest::Approx(var / 2).epsilon(0.03));
  CHECK(std::fabs(static_cast<double>(cross) / n) < 0.01 * var);
}
