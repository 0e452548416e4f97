#include "cablewatch/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <string>

#include "cablewatch/types.hpp"
#include "kernels_detail.hpp"

namespace cablewatch::kernels {

const char* to_string(Backend b) {
  switch (b) {
    case Backend::scalar: return "scalar";
    case Backend::avx2:   return "avx2";
    case Backend::neon:   return "neon";
  }
  return "?";
}

namespace detail {

std::complex<double> complex_dot_scalar(const std::complex<double>* a,
                                        const std::complex<double>* b,
                                        std::size_t n) {
  double re = 0.0, im = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double ar = a[i].real(), ai = a[i].imag();
    const double br = b[i].real(), bi = b[i].imag();
    re += ar * br + ai * bi;   // conj(a) * b
    im += ar * bi - ai * br;
  }
  return {re, im};
}

void abs_c128_scalar(const std::complex<double>* a, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = std::sqrt(a[i].real() * a[i].real() + a[i].imag() * a[i].imag());
  }
}

double sum_abs_c128_scalar(const std::complex<double>* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    acc += std::sqrt(a[i].real() * a[i].real() + a[i].imag() * a[i].imag());
  }
  return acc;
}

double sum_f64_scalar(const double* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}

#if defined(__aarch64__) || defined(__ARM_NEON)
#define CW_HAVE_NEON 1
#include <arm_neon.h>

std::complex<double> complex_dot_neon(const std::complex<double>* a,
                                      const std::complex<double>* b,
                                      std::size_t n) {
  float64x2_t acc_re = vdupq_n_f64(0.0);
  float64x2_t acc_im = vdupq_n_f64(0.0);
  const double* pa = reinterpret_cast<const double*>(a);
  const double* pb = reinterpret_cast<const double*>(b);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    // x[0] = {re0, im0}, x[1] = {re1, im1}
    float64x2x2_t va = vld2q_f64(pa + 2 * i);
    float64x2x2_t vb = vld2q_f64(pb + 2 * i);
    acc_re = vfmaq_f64(acc_re, va.val[0], vb.val[0]);
    acc_re = vfmaq_f64(acc_re, va.val[1], vb.val[1]);
    acc_im = vfmaq_f64(acc_im, va.val[0], vb.val[1]);
    acc_im = vfmsq_f64(acc_im, va.val[1], vb.val[0]);
  }
  double re = vaddvq_f64(acc_re);
  double im = vaddvq_f64(acc_im);
  for (; i < n; ++i) {
    const double ar = a[i].real(), ai = a[i].imag();
    const double br = b[i].real(), bi = b[i].imag();
    re += ar * br + ai * bi;
    im += ar * bi - ai * br;
  }
  return {re, im};
}

void abs_c128_neon(const std::complex<double>* a, double* out, std::size_t n) {
  const double* pa = reinterpret_cast<const double*>(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2x2_t va = vld2q_f64(pa + 2 * i);
    float64x2_t mag2 = vmulq_f64(va.val[0], va.val[0]);
    mag2 = vfmaq_f64(mag2, va.val[1], va.val[1]);
    vst1q_f64(out + i, vsqrtq_f64(mag2));
  }
  for (; i < n; ++i) {
    out[i] = std::sqrt(a[i].real() * a[i].real() + a[i].imag() * a[i].imag());
  }
}

double sum_abs_c128_neon(const std::complex<double>* a, std::size_t n) {
  const double* pa = reinterpret_cast<const double*>(a);
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2x2_t va = vld2q_f64(pa + 2 * i);
    float64x2_t mag2 = vmulq_f64(va.val[0], va.val[0]);
    mag2 = vfmaq_f64(mag2, va.val[1], va.val[1]);
    acc = vaddq_f64(acc, vsqrtq_f64(mag2));
  }
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) {
    s += std::sqrt(a[i].real() * a[i].real() + a[i].imag() * a[i].imag());
  }
  return s;
}

double sum_f64_neon(const double* a, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(a + i));
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) s += a[i];
  return s;
}
#endif  // NEON

}  // namespace detail

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma") &&
         detail::avx2_compiled_in();
#else
  return false;
#endif
}

bool cpu_has_neon() {
#ifdef CW_HAVE_NEON
  return true;
#else
  return false;
#endif
}

Backend detect_backend() {
  if (const char* env = std::getenv("CABLEWATCH_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
    if (std::strcmp(env, "avx2") == 0 && cpu_has_avx2()) return Backend::avx2;
    if (std::strcmp(env, "neon") == 0 && cpu_has_neon()) return Backend::neon;
    // Unknown or unsupported request: fall through to detection.
  }
  if (cpu_has_avx2()) return Backend::avx2;
  if (cpu_has_neon()) return Backend::neon;
  return Backend::scalar;
}

Backend& backend_slot() {
  static Backend b = detect_backend();
  return b;
}

}  // namespace

Backend active_backend() { return backend_slot(); }

bool backend_supported(Backend b) {
  switch (b) {
    case Backend::scalar: return true;
    case Backend::avx2:   return cpu_has_avx2();
    case Backend::neon:   return cpu_has_neon();
  }
  return false;
}

void force_backend(Backend b) {
  if (!backend_supported(b)) {
    throw ValidationError(std::string("kernel backend not supported here: ") +
                          to_string(b));
  }
  backend_slot() = b;
}

std::complex<double> complex_dot(const std::complex<double>* a,
                                 const std::complex<double>* b, std::size_t n) {
  switch (active_backend()) {
    case Backend::avx2: return detail::complex_dot_avx2(a, b, n);
#ifdef CW_HAVE_NEON
    case Backend::neon: return detail::complex_dot_neon(a, b, n);
#endif
    default:            return detail::complex_dot_scalar(a, b, n);
  }
}

void abs_c128(const std::complex<double>* a, double* out, std::size_t n) {
  switch (active_backend()) {
    case Backend::avx2: detail::abs_c128_avx2(a, out, n); return;
#ifdef CW_HAVE_NEON
    case Backend::neon: detail::abs_c128_neon(a, out, n); return;
#endif
    default:            detail::abs_c128_scalar(a, out, n); return;
  }
}

double sum_abs_c128(const std::complex<double>* a, std::size_t n) {
  switch (active_backend()) {
    case Backend::avx2: return detail::sum_abs_c128_avx2(a, n);
#ifdef CW_HAVE_NEON
    case Backend::neon: return detail::sum_abs_c128_neon(a, n);
#endif
    default:            return detail::sum_abs_c128_scalar(a, n);
  }
}

double sum_f64(const double* a, std::size_t n) {
  switch (active_backend()) {
    case Backend::avx2: return detail::sum_f64_avx2(a, n);
#ifdef CW_HAVE_NEON
    case Backend::neon: return detail::sum_f64_neon(a, n);
#endif
    default:            return detail::sum_f64_scalar(a, n);
  }
}

}  // namespace cablewatch::kernels
