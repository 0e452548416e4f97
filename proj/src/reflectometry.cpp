#include "cablewatch/reflectometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>

#include "cablewatch/dsp.hpp"
#include "cablewatch/kernels.hpp"

namespace cablewatch::reflect {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

void MultitoneConfig::validate() const {
  if (!(center_freq_hz > 0.0)) throw ValidationError("center frequency must be positive");
  if (!(sample_rate_hz > 0.0)) throw ValidationError("sample rate must be positive");
  if (oversampling < 1) throw ValidationError("oversampling must be at least 1");
  if (n_tones < 2) throw ValidationError("need at least two tones");
  if (n_tones % 2 != 0) throw ValidationError("tone count must be even");
  if (!active_tone_mask.empty() && active_tone_mask.size() != n_tones) {
    throw ValidationError("tone mask length must match the tone count");
  }
  if (active_count() == 0) throw ValidationError("at least one tone must be active");
  if (center_freq_hz < sample_rate_hz / 2.0) {
    throw ValidationError("carrier must clear the occupied half-bandwidth");
  }
}

double MultitoneConfig::effective_rate_hz() const {
  return sample_rate_hz * static_cast<double>(oversampling);
}

std::size_t MultitoneConfig::symbol_length() const {
  return static_cast<std::size_t>(n_tones) * oversampling;
}

dvec MultitoneConfig::tone_offsets_hz() const {
  // Indices -n/2..-1, 1..n/2: integer cycles over the symbol, no DC tone,
  // symmetric about the carrier.
  const double df = sample_rate_hz / static_cast<double>(n_tones);
  dvec f(n_tones);
  const int half = static_cast<int>(n_tones) / 2;
  for (int t = 0; t < static_cast<int>(n_tones); ++t) {
    const int m = (t < half) ? (t - half) : (t - half + 1);
    f[static_cast<std::size_t>(t)] = static_cast<double>(m) * df;
  }
  return f;
}

bool MultitoneConfig::active(std::size_t tone) const {
  return active_tone_mask.empty() || active_tone_mask[tone];
}

std::size_t MultitoneConfig::active_count() const {
  if (active_tone_mask.empty()) return n_tones;
  std::size_t n = 0;
  for (bool b : active_tone_mask) n += b ? 1 : 0;
  return n;
}

bool MultitoneConfig::operator==(const MultitoneConfig& o) const {
  auto mask_of = [](const MultitoneConfig& c) {
    return c.active_tone_mask.empty() ? std::vector<bool>(c.n_tones, true)
                                      : c.active_tone_mask;
  };
  return center_freq_hz == o.center_freq_hz && sample_rate_hz == o.sample_rate_hz &&
         oversampling == o.oversampling && n_tones == o.n_tones && seed == o.seed &&
         mask_of(*this) == mask_of(o);
}

void mask_band(MultitoneConfig& cfg, double f_lo_hz, double f_hi_hz) {
  cfg.validate();
  if (!(f_lo_hz < f_hi_hz)) throw ValidationError("empty mask band");
  const dvec offsets = cfg.tone_offsets_hz();
  if (cfg.active_tone_mask.empty()) cfg.active_tone_mask.assign(cfg.n_tones, true);
  for (std::size_t t = 0; t < cfg.n_tones; ++t) {
    const double f = cfg.center_freq_hz + offsets[t];
    if (f >= f_lo_hz && f <= f_hi_hz) cfg.active_tone_mask[t] = false;
  }
  if (cfg.active_count() == 0) {
    throw ValidationError("mask would disable every tone");
  }
}

namespace {

/// Phase schedule shared by probe generation and component modeling.
dvec tone_phases(const MultitoneConfig& cfg) {
  dsp::Rng rng(dsp::Rng::derive(cfg.seed, 0x70726f6265ULL));
  dvec phase(cfg.n_tones);
  for (auto& p : phase) p = kTwoPi * rng.uniform();
  return phase;
}

/// Samples [first, first+count) of the probe's continuous-time tone sum
/// delayed by tau samples; zero outside the delayed symbol support.
cvec delayed_tone_sum(const MultitoneConfig& cfg, double tau, std::size_t first,
                      std::size_t count) {
  const dvec offsets = cfg.tone_offsets_hz();
  const dvec phase = tone_phases(cfg);
  const double fs = cfg.effective_rate_hz();
  const double amp = 1.0 / std::sqrt(static_cast<double>(cfg.active_count()));
  const double len = static_cast<double>(cfg.symbol_length());

  cvec out(count, cplx(0.0, 0.0));
  for (std::size_t t = 0; t < cfg.n_tones; ++t) {
    if (!cfg.active(t)) continue;
    const double w = kTwoPi * offsets[t] / fs;
    const double arg0 = w * (static_cast<double>(first) - tau) + phase[t];
    const cplx step(std::cos(w), std::sin(w));
    cplx ph(amp * std::cos(arg0), amp * std::sin(arg0));
    for (std::size_t k = 0; k < count; ++k) {
      out[k] += ph;
      ph *= step;
    }
  }
  // Window to the symbol support.
  for (std::size_t k = 0; k < count; ++k) {
    const double n = static_cast<double>(first + k);
    if (n < tau || n >= tau + len) out[k] = cplx(0.0, 0.0);
  }
  return out;
}

}  // namespace

Waveform generate_probe(const MultitoneConfig& cfg) {
  cfg.validate();
  const std::size_t len = cfg.symbol_length();
  const dvec offsets = cfg.tone_offsets_hz();
  const dvec phase = tone_phases(cfg);
  const double amp = 1.0 / std::sqrt(static_cast<double>(cfg.active_count()));
  const double fs = cfg.effective_rate_hz();

  cvec samples(len, cplx(0.0, 0.0));
  for (std::size_t t = 0; t < cfg.n_tones; ++t) {
    if (!cfg.active(t)) continue;
    const double w = kTwoPi * offsets[t] / fs;
    for (std::size_t n = 0; n < len; ++n) {
      const double arg = w * static_cast<double>(n) + phase[t];
      samples[n] += cplx(amp * std::cos(arg), amp * std::sin(arg));
    }
  }
  return {std::move(samples), fs};
}

Waveform receiver_capture(const Waveform& probe, Waveform echo) {
  if (probe.sample_rate_hz != echo.sample_rate_hz) {
    throw ValidationError("probe and echo sample rates differ");
  }
  if (echo.samples.size() < probe.samples.size()) {
    throw ValidationError("echo shorter than the probe");
  }
  for (std::size_t i = 0; i < probe.samples.size(); ++i) {
    echo.samples[i] += probe.samples[i];
  }
  return echo;
}

Reflectogram correlate(const Waveform& probe, const Waveform& echo,
                       const MultitoneConfig& cfg, double velocity_factor) {
  cfg.validate();
  if (!(velocity_factor > 0.0) || !(velocity_factor < 1.0)) {
    throw ValidationError("velocity factor must lie in (0, 1)");
  }
  if (probe.samples.empty()) throw ValidationError("probe is empty");
  if (probe.sample_rate_hz != echo.sample_rate_hz) {
    throw ValidationError("probe and echo sample rates differ");
  }
  if (echo.samples.size() < probe.samples.size()) {
    throw ValidationError("echo shorter than the probe");
  }

  const std::size_t plen = probe.samples.size();
  const std::size_t n_lags = echo.samples.size() - plen + 1;
  const double energy =
      kernels::complex_dot(probe.samples.data(), probe.samples.data(), plen).real();

  Reflectogram r;
  r.config = cfg;
  r.values.resize(n_lags);
  r.complex_values.resize(n_lags);
  for (std::size_t lag = 0; lag < n_lags; ++lag) {
    const cplx acc =
        kernels::complex_dot(probe.samples.data(), echo.samples.data() + lag, plen);
    r.complex_values[lag] = acc / energy;
    r.values[lag] = std::abs(acc) / energy;
  }
  r.meters_per_sample =
      velocity_factor * kSpeedOfLight / (2.0 * cfg.effective_rate_hz());

  // Direct coupling dominates any physical capture and sits inside the
  // first resolution cell: the probe is added at acquisition start. The
  // correlation top is nearly flat across adjacent lags, so echo skirts can
  // tip the integer argmax by one; sub-sample anchoring happens downstream.
  const std::size_t cell = std::min<std::size_t>(cfg.oversampling, n_lags);
  r.tx_peak_index = 0;
  for (std::size_t i = 1; i < cell; ++i) {
    if (r.values[i] > r.values[r.tx_peak_index]) r.tx_peak_index = i;
  }
  return r;
}

namespace {

double parabolic_offset(double ym, double y0, double yp) {
  const double denom = ym - 2.0 * y0 + yp;
  if (denom == 0.0) return 0.0;
  double d = 0.5 * (ym - yp) / denom;
  return std::clamp(d, -1.0, 1.0);
}

std::size_t argmax_abs(const cvec& v) {
  std::size_t best = 0;
  double top = -1.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double m = std::abs(v[i]);
    if (m > top) {
      top = m;
      best = i;
    }
  }
  return best;
}

struct Component {
  double tau = 0.0;
  double magnitude = 0.0;
};

/// Correlation signature of a point reflector at a fractional delay,
/// evaluated over the whole lag axis. The finite symbol window makes the
/// correlation of even a single echo leak across every lag (truncated
/// tone crosstalk, a few percent of the echo at long range), so kernels
/// must cover the full axis or that leakage masquerades as extra peaks.
/// FFT correlation keeps that affordable.
class KernelFactory {
 public:
  KernelFactory(const MultitoneConfig& cfg, const Waveform& probe,
                std::size_t n_lags)
      : cfg_(cfg), probe_(probe), n_lags_(n_lags) {
    const std::size_t plen = probe.samples.size();
    capture_len_ = n_lags + plen - 1;
    n_fft_ = dsp::next_pow2(capture_len_);
    energy_ =
        kernels::complex_dot(probe.samples.data(), probe.samples.data(), plen).real();
    probe_fft_conj_ = dsp::fft_padded(probe.samples, n_fft_);
    for (auto& v : probe_fft_conj_) v = std::conj(v);
  }

  std::size_t n_lags() const { return n_lags_; }

  cvec kernel(double tau) const {
    const std::size_t plen = probe_.samples.size();
    const std::size_t first =
        static_cast<std::size_t>(std::max(0.0, std::floor(tau)));
    const std::size_t count = std::min(capture_len_ - first, plen + 2);
    const cvec window = delayed_tone_sum(cfg_, tau, first, count);
    cvec spec(n_fft_, cplx(0.0, 0.0));
    std::copy(window.begin(), window.end(),
              spec.begin() + static_cast<std::ptrdiff_t>(first));
    dsp::fft(spec, false);
    for (std::size_t k = 0; k < n_fft_; ++k) spec[k] *= probe_fft_conj_[k];
    const cvec corr = dsp::ifft(std::move(spec));
    cvec out(n_lags_);
    for (std::size_t l = 0; l < n_lags_; ++l) out[l] = corr[l] / energy_;
    return out;
  }

 private:
  const MultitoneConfig& cfg_;
  const Waveform& probe_;
  std::size_t n_lags_;
  std::size_t capture_len_ = 0;
  std::size_t n_fft_ = 0;
  double energy_ = 0.0;
  cvec probe_fft_conj_;
};

/// Sub-sample delay of the excursion at i0, by maximizing the projection
/// gain of a reflector kernel onto the trace over one resolution cell
/// around it. The search models the kernel shape exactly, so the estimate
/// is free of the bias a magnitude parabola picks up from the kernel's own
/// crosstalk floor. Window of one cell: wide enough for the main lobe,
/// narrow enough to keep resolved neighbors out of the fit.
double refine_delay(const KernelFactory& kf, const cvec& trace, std::size_t i0,
                    std::size_t cell) {
  const std::size_t n = trace.size();
  const std::size_t lo = (i0 > cell) ? i0 - cell : 0;
  const std::size_t hi = std::min(n, i0 + cell + 1);

  auto quality = [&](double tau) {
    const cvec k = kf.kernel(tau);
    const cplx num =
        kernels::complex_dot(k.data() + lo, trace.data() + lo, hi - lo);
    const double den =
        kernels::complex_dot(k.data() + lo, k.data() + lo, hi - lo).real();
    return (den > 0.0) ? std::norm(num) / den : 0.0;
  };

  double a = (i0 > 0) ? static_cast<double>(i0) - 1.0 : 0.0;
  double b = std::min(static_cast<double>(i0) + 1.0, static_cast<double>(n - 1));
  constexpr double kGolden = 0.6180339887498949;
  double c1 = b - (b - a) * kGolden;
  double c2 = a + (b - a) * kGolden;
  double q1 = quality(c1);
  double q2 = quality(c2);
  for (int step = 0; step < 14; ++step) {
    if (q1 > q2) {
      b = c2;
      c2 = c1;
      q2 = q1;
      c1 = b - (b - a) * kGolden;
      q1 = quality(c1);
    } else {
      a = c1;
      c1 = c2;
      q1 = q2;
      c2 = a + (b - a) * kGolden;
      q2 = quality(c2);
    }
  }
  return 0.5 * (a + b);
}

/// Successive cancellation on the coherent residual: repeatedly take the
/// strongest excursion, refine its sub-sample delay by matched-filter
/// quality, subtract the fitted kernel over the full axis, and record the
/// component. Stops below the threshold or at the iteration cap.
std::vector<Component> extract_components(const KernelFactory& kf, cvec residual,
                                          double threshold, std::size_t cell) {
  const std::size_t n_lags = residual.size();

  std::vector<Component> components;
  constexpr std::size_t kMaxComponents = 24;
  for (std::size_t iter = 0; iter < kMaxComponents; ++iter) {
    const std::size_t i0 = argmax_abs(residual);
    const double top = std::abs(residual[i0]);
    if (top < threshold) break;

    const double tau = refine_delay(kf, residual, i0, cell);
    const std::size_t lo = (i0 > cell) ? i0 - cell : 0;
    const std::size_t hi = std::min(n_lags, i0 + cell + 1);

    // Full-axis least squares and subtraction: removes the component's
    // skirts and crosstalk everywhere, not just near the main lobe.
    const cvec kern = kf.kernel(tau);
    const cplx num =
        kernels::complex_dot(kern.data(), residual.data(), n_lags);
    const double den = kernels::complex_dot(kern.data(), kern.data(), n_lags).real();
    if (!(den > 0.0)) break;
    const cplx amp = num / den;
    for (std::size_t l = 0; l < n_lags; ++l) residual[l] -= amp * kern[l];
    if (std::abs(residual[i0]) >= top) break;  // model failed to bite

    double kpeak = 0.0;
    for (std::size_t l = lo; l < hi; ++l) kpeak = std::max(kpeak, std::abs(kern[l]));
    components.push_back({tau, std::abs(amp) * kpeak});
  }
  return components;
}

}  // namespace

PeakSet detect_peaks(const Reflectogram& r, const Reflectogram* baseline,
                     double magnitude_threshold) {
  if (!(magnitude_threshold > 0.0)) {
    throw ValidationError("peak threshold must be positive");
  }
  if (baseline) {
    if (baseline->values.size() != r.values.size()) {
      throw ValidationError("baseline length does not match the reflectogram");
    }
    if (!(baseline->config == r.config)) {
      throw ValidationError("baseline was captured with a different probe");
    }
  }

  PeakSet out;
  double tx = static_cast<double>(r.tx_peak_index);

  const Reflectogram& ref = baseline ? *baseline : r;
  const bool ref_coherent = ref.complex_values.size() == r.values.size();
  const bool coherent = baseline && ref_coherent &&
                        r.complex_values.size() == r.values.size();

  std::optional<Waveform> probe;
  std::optional<KernelFactory> factory;
  if (ref_coherent) {
    probe.emplace(generate_probe(r.config));
    factory.emplace(r.config, *probe, r.values.size());
    // Sub-sample anchor for the emission instant, from the reference trace.
    // The integer transmit index can sit one lag off (the correlation top
    // is flat to 0.1 percent), which would skew every distance by a full
    // sample if used directly.
    tx = refine_delay(*factory, ref.complex_values, ref.tx_peak_index,
                      r.config.oversampling);
  }

  if (coherent) {
    cvec residual(r.complex_values.size());
    for (std::size_t i = 0; i < residual.size(); ++i) {
      residual[i] = r.complex_values[i] - baseline->complex_values[i];
    }
    std::vector<Component> comps =
        extract_components(*factory, std::move(residual), magnitude_threshold,
                           r.config.oversampling);

    // Components inside one resolution cell of a stronger one are
    // unresolved echoes of the same discontinuity; that includes the
    // fit residue an extended (multi-edge) reflector leaves at the skirt
    // of its own lobe.
    std::sort(comps.begin(), comps.end(),
              [](const Component& a, const Component& b) {
                return a.magnitude > b.magnitude;
              });
    std::vector<Component> kept;
    const double merge_radius = static_cast<double>(r.config.oversampling);
    for (const auto& c : comps) {
      bool merged = false;
      for (const auto& k : kept) {
        if (std::abs(c.tau - k.tau) <= merge_radius) {
          merged = true;
          break;
        }
      }
      if (!merged) kept.push_back(c);
    }
    std::sort(kept.begin(), kept.end(),
              [](const Component& a, const Component& b) { return a.tau < b.tau; });

    for (const auto& c : kept) {
      Peak p;
      p.refined_index = std::max(c.tau, tx);
      p.sample_index = static_cast<std::size_t>(std::lround(p.refined_index));
      p.magnitude = c.magnitude;
      p.distance_m = (p.refined_index - tx) * r.meters_per_sample;
      out.peaks.push_back(p);
    }
  } else {
    dvec work(r.values.size());
    if (baseline) {
      for (std::size_t i = 0; i < work.size(); ++i) {
        work[i] = std::max(r.values[i] - baseline->values[i], 0.0);
      }
    } else {
      work = r.values;
    }
    const std::size_t n = work.size();
    for (std::size_t i = 0; i < n; ++i) {
      const double left = (i == 0) ? -1.0 : work[i - 1];
      const double right = (i + 1 < n) ? work[i + 1] : -1.0;
      if (work[i] < magnitude_threshold || work[i] <= left || work[i] < right) continue;
      Peak p;
      p.sample_index = i;
      p.magnitude = work[i];
      p.refined_index = static_cast<double>(i);
      if (i > 0 && i + 1 < n) {
        p.refined_index += parabolic_offset(work[i - 1], work[i], work[i + 1]);
      }
      p.distance_m = (p.refined_index - tx) * r.meters_per_sample;
      out.peaks.push_back(p);
    }
  }

  // End of line: strongest feature of the reference trace once the direct
  // coupling's kernel is removed, crosstalk floor and all. Meaningful when
  // the reference is a healthy capture; a matched termination reflects
  // nothing, leaves no excursion above threshold, and the index falls back
  // to the transmit peak.
  out.end_of_line_index = ref.tx_peak_index;
  if (ref_coherent) {
    const cvec k0 = factory->kernel(tx);
    const std::size_t n = k0.size();
    const cplx num = kernels::complex_dot(k0.data(), ref.complex_values.data(), n);
    const double den = kernels::complex_dot(k0.data(), k0.data(), n).real();
    if (den > 0.0) {
      const cplx amp = num / den;
      std::size_t best = ref.tx_peak_index;
      double best_mag = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double m = std::abs(ref.complex_values[i] - amp * k0[i]);
        if (m > best_mag) {
          best_mag = m;
          best = i;
        }
      }
      if (best_mag >= magnitude_threshold) out.end_of_line_index = best;
    }
  } else {
    // Magnitude-only traces cannot separate the line end from the coupling
    // skirt coherently; take the strongest value beyond the main lobe.
    const std::size_t start =
        std::min(ref.values.size(), ref.tx_peak_index + 2 * r.config.oversampling);
    std::size_t best = ref.tx_peak_index;
    double best_mag = -1.0;
    for (std::size_t i = start; i < ref.values.size(); ++i) {
      if (ref.values[i] > best_mag) {
        best_mag = ref.values[i];
        best = i;
      }
    }
    if (best_mag >= magnitude_threshold) out.end_of_line_index = best;
  }
  return out;
}

dvec localize(const Reflectogram& r, const PeakSet& peaks) {
  dvec distances;
  distances.reserve(peaks.peaks.size());
  for (const auto& p : peaks.peaks) {
    // Anything more than half a sample before the emission anchor cannot be
    // an echo of this capture.
    if (p.distance_m < -0.5 * r.meters_per_sample) {
      throw ValidationError("peak precedes the direct-coupling reference");
    }
    distances.push_back(std::max(p.distance_m, 0.0));
  }
  return distances;
}

OmtdrClassification classify_omtdr(const PeakSet& peaks,
                                   const thresholds::ThresholdPair& th) {
  OmtdrClassification c;
  for (const auto& p : peaks.peaks) c.psi = std::max(c.psi, p.magnitude);
  c.verdict = thresholds::classify_deviation(c.psi, th);
  c.flag = thresholds::flag_for(c.verdict);
  return c;
}

}  // namespace cablewatch::reflect
