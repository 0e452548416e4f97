#pragma once

#include <complex>
#include <cstddef>

// Array kernels on the hot paths (lag correlation, magnitude sweeps, mean
// reductions). Every kernel has a scalar reference implementation plus SIMD
// variants; the active variant is picked once at runtime from cpu features.
// All variants of one kernel agree to rounding error, and tests pin that.

namespace cablewatch::kernels {

enum class Backend { scalar, avx2, neon };

const char* to_string(Backend b);

/// Backend chosen for this process. Detection order: CABLEWATCH_KERNELS env
/// override, then best supported instruction set, else scalar.
Backend active_backend();

bool backend_supported(Backend b);

/// Force a backend (tests, benchmarking). Throws ValidationError if the
/// requested backend is not supported on this machine.
void force_backend(Backend b);

/// sum_{i} conj(a[i]) * b[i]
std::complex<double> complex_dot(const std::complex<double>* a,
                                 const std::complex<double>* b, std::size_t n);

/// out[i] = |a[i]|
void abs_c128(const std::complex<double>* a, double* out, std::size_t n);

/// sum_{i} |a[i]|
double sum_abs_c128(const std::complex<double>* a, std::size_t n);

/// sum_{i} a[i]
double sum_f64(const double* a, std::size_t n);

}  // namespace cablewatch::kernels
