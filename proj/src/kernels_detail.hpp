#pragma once

#include <complex>
#include <cstddef>

// Internal: per-backend kernel entry points shared between the generic and
// the -mavx2 translation units.

namespace cablewatch::kernels::detail {

std::complex<double> complex_dot_scalar(const std::complex<double>* a,
                                        const std::complex<double>* b,
                                        std::size_t n);
void abs_c128_scalar(const std::complex<double>* a, double* out, std::size_t n);
double sum_abs_c128_scalar(const std::complex<double>* a, std::size_t n);
double sum_f64_scalar(const double* a, std::size_t n);

std::complex<double> complex_dot_avx2(const std::complex<double>* a,
                                      const std::complex<double>* b,
                                      std::size_t n);
void abs_c128_avx2(const std::complex<double>* a, double* out, std::size_t n);
double sum_abs_c128_avx2(const std::complex<double>* a, std::size_t n);
double sum_f64_avx2(const double* a, std::size_t n);

/// False when this build carries no AVX2 code path at all.
bool avx2_compiled_in();

}  // namespace cablewatch::kernels::detail
