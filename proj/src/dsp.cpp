#include "cablewatch/dsp.hpp"

#include <cmath>
#include <numbers>

namespace cablewatch::dsp {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

void fft(cvec& x, bool inverse) {
  const std::size_t n = x.size();
  if (!is_pow2(n)) throw ValidationError("fft size must be a power of two");
  if (n == 1) return;

  // Bit-reversal permutation.
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }

  const double sign = inverse ? 1.0 : -1.0;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = sign * kTwoPi / static_cast<double>(len);
    const cplx wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      cplx w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        cplx u = x[i + k];
        cplx v = x[i + k + len / 2] * w;
        x[i + k] = u + v;
        x[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& v : x) v *= inv;
  }
}

cvec fft_padded(const cvec& x, std::size_t n) {
  if (n < x.size() || !is_pow2(n)) {
    throw ValidationError("fft_padded: n must be a power of two >= input size");
  }
  cvec out(n, cplx(0.0, 0.0));
  std::copy(x.begin(), x.end(), out.begin());
  fft(out, false);
  return out;
}

cvec ifft(cvec x) {
  fft(x, true);
  return x;
}

dvec half_hann(std::size_t n) {
  if (n < 2) throw ValidationError("half_hann needs at least two points");
  dvec w(n);
  for (std::size_t k = 0; k < n; ++k) {
    w[k] = 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(k) /
                                 static_cast<double>(n - 1)));
  }
  return w;
}

std::uint64_t Rng::derive(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 over seed xor a spread copy of the stream tag.
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t Rng::next_u64() {
  // splitmix64 step: the whole generator is this one-liner state walk.
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::gaussian() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(kTwoPi * u2);
  have_spare_ = true;
  return r * std::cos(kTwoPi * u2);
}

cplx Rng::cgaussian(double var) {
  const double s = std::sqrt(var * 0.5);
  const double re = gaussian();
  const double im = gaussian();
  return {s * re, s * im};
}

}  // namespace cablewatch::dsp
