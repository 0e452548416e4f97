// AVX2 kernel variants. This file is built with -mavx2 -mfma on x86 targets;
// callers reach it only after a cpuid check, so no other translation unit may
// inline from here.

#include <cmath>

#include "kernels_detail.hpp"

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>

namespace cablewatch::kernels::detail {

bool avx2_compiled_in() { return true; }

std::complex<double> complex_dot_avx2(const std::complex<double>* a,
                                      const std::complex<double>* b,
                                      std::size_t n) {
  // Two complex doubles per 256-bit lane pair: [re0 im0 re1 im1].
  __m256d acc_re = _mm256_setzero_pd();
  __m256d acc_im = _mm256_setzero_pd();
  const double* pa = reinterpret_cast<const double*>(a);
  const double* pb = reinterpret_cast<const double*>(b);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    __m256d va = _mm256_loadu_pd(pa + 2 * i);
    __m256d vb = _mm256_loadu_pd(pb + 2 * i);
    // re += ar*br + ai*bi ; im += ar*bi - ai*br
    __m256d vb_sw = _mm256_permute_pd(vb, 0x5);  // [bi0 br0 bi1 br1]
    acc_re = _mm256_fmadd_pd(va, vb, acc_re);
    acc_im = _mm256_fmadd_pd(va, vb_sw, acc_im);
  }
  // acc_re lanes: [ar*br, ai*bi, ...] -> sum all.
  // acc_im lanes: [ar*bi, ai*br, ...] -> subtract odd lanes from even lanes.
  alignas(32) double re4[4], im4[4];
  _mm256_store_pd(re4, acc_re);
  _mm256_store_pd(im4, acc_im);
  double re = re4[0] + re4[1] + re4[2] + re4[3];
  double im = (im4[0] - im4[1]) + (im4[2] - im4[3]);
  for (; i < n; ++i) {
    const double ar = a[i].real(), ai = a[i].imag();
    const double br = b[i].real(), bi = b[i].imag();
    re += ar * br + ai * bi;
    im += ar * bi - ai * br;
  }
  return {re, im};
}

void abs_c128_avx2(const std::complex<double>* a, double* out, std::size_t n) {
  const double* pa = reinterpret_cast<const double*>(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v0 = _mm256_loadu_pd(pa + 2 * i);      // re0 im0 re1 im1
    __m256d v1 = _mm256_loadu_pd(pa + 2 * i + 4);  // re2 im2 re3 im3
    __m256d sq0 = _mm256_mul_pd(v0, v0);
    __m256d sq1 = _mm256_mul_pd(v1, v1);
    // hadd pairs within 128-bit halves: [m0 m2' | m1 m3'] needs a permute.
    __m256d sums = _mm256_hadd_pd(sq0, sq1);                   // m0 m2 m1 m3
    sums = _mm256_permute4x64_pd(sums, _MM_SHUFFLE(3, 1, 2, 0));  // m0 m1 m2 m3
    _mm256_storeu_pd(out + i, _mm256_sqrt_pd(sums));
  }
  for (; i < n; ++i) {
    out[i] = std::sqrt(a[i].real() * a[i].real() + a[i].imag() * a[i].imag());
  }
}

double sum_abs_c128_avx2(const std::complex<double>* a, std::size_t n) {
  const double* pa = reinterpret_cast<const double*>(a);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d v0 = _mm256_loadu_pd(pa + 2 * i);
    __m256d v1 = _mm256_loadu_pd(pa + 2 * i + 4);
    __m256d sums = _mm256_hadd_pd(_mm256_mul_pd(v0, v0), _mm256_mul_pd(v1, v1));
    sums = _mm256_permute4x64_pd(sums, _MM_SHUFFLE(3, 1, 2, 0));
    acc = _mm256_add_pd(acc, _mm256_sqrt_pd(sums));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) {
    s += std::sqrt(a[i].real() * a[i].real() + a[i].imag() * a[i].imag());
  }
  return s;
}

double sum_f64_avx2(const double* a, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) s += a[i];
  return s;
}

}  // namespace cablewatch::kernels::detail

#else  // non-x86 build or AVX2 not enabled for this TU: keep the symbols.

namespace cablewatch::kernels::detail {

bool avx2_compiled_in() { return false; }

std::complex<double> complex_dot_avx2(const std::complex<double>* a,
                                      const std::complex<double>* b,
                                      std::size_t n) {
  return complex_dot_scalar(a, b, n);
}
void abs_c128_avx2(const std::complex<double>* a, double* out, std::size_t n) {
  abs_c128_scalar(a, out, n);
}
double sum_abs_c128_avx2(const std::complex<double>* a, std::size_t n) {
  return sum_abs_c128_scalar(a, n);
}
double sum_f64_avx2(const double* a, std::size_t n) {
  return sum_f64_scalar(a, n);
}

}  // namespace cablewatch::kernels::detail

#endif
