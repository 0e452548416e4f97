#pragma once

#include <cstdint>

#include "cablewatch/types.hpp"

namespace cablewatch::dsp {

/// True if n is a nonzero power of two.
bool is_pow2(std::size_t n);

/// Smallest power of two >= n.
std::size_t next_pow2(std::size_t n);

/// In-place radix-2 complex FFT. Size must be a power of two.
/// inverse=true applies the 1/N factor.
void fft(cvec& x, bool inverse);

/// Out-of-place convenience wrappers; input is zero-padded to n (power of
/// two, n >= x.size()).
cvec fft_padded(const cvec& x, std::size_t n);
cvec ifft(cvec x);

/// Half-cosine taper over [0, n-1]: w[0] = 1, w[n-1] = 0. Used to roll off
/// the top of a one-sided spectrum before inverse transforming.
dvec half_hann(std::size_t n);

/// Deterministic RNG with splittable streams. Uniform/gaussian draws are
/// produced by fixed arithmetic on raw 64-bit output, so sequences are
/// identical across standard libraries and platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  /// Stable derived seed for an independent stream.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t next_u64();
  /// Uniform on [0, 1).
  double uniform();
  /// Standard normal (Box-Muller; two uniforms per pair of draws).
  double gaussian();
  /// Zero-mean circular complex gaussian with total variance var.
  cplx cgaussian(double var);

 private:
  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace cablewatch::dsp
