#include "cablewatch/channel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>

#include "cablewatch/dsp.hpp"

namespace cablewatch::chansim {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kNpPerDb = std::numbers::ln10 / 20.0;

// Leakage model for an insulation fault: damaged sheath admits a shunt path
// whose conductance grows with the impedance step and with damage length,
// saturating at extent_ref (wider damage stops adding new leakage paths
// within the probing wavelengths used here).
constexpr double kLeakRefSiemens = 0.02;
constexpr double kLeakExtentRefM = 0.1;

double fault_conductance(double z_perturbation_ohm, double extent_m, double z0_ohm) {
  const double step = std::abs(z_perturbation_ohm) / z0_ohm;
  const double reach = std::min(extent_m, kLeakExtentRefM) / kLeakExtentRefM;
  return kLeakRefSiemens * step * reach;
}

struct Abcd {
  cplx a{1.0, 0.0}, b{0.0, 0.0}, c{0.0, 0.0}, d{1.0, 0.0};

  Abcd then(const Abcd& r) const {
    return {a * r.a + b * r.c, a * r.b + b * r.d,
            c * r.a + d * r.c, c * r.b + d * r.d};
  }
};

cplx propagation_constant(const CableSpec& cable, double f_hz) {
  const double alpha_np = cable.attenuation_db_per_m(f_hz) * kNpPerDb;
  const double beta = kTwoPi * f_hz / cable.velocity();
  return {alpha_np, beta};
}

Abcd element_abcd(const LineElement& e, const CableSpec& cable, double f_hz) {
  if (e.kind == LineElement::Kind::shunt) {
    return {cplx(1.0, 0.0), cplx(0.0, 0.0), cplx(e.conductance_s, 0.0), cplx(1.0, 0.0)};
  }
  const cplx gl = propagation_constant(cable, f_hz) * e.length_m;
  const cplx ch = std::cosh(gl);
  const cplx sh = std::sinh(gl);
  const cplx zc(e.z_c_ohm, 0.0);
  return {ch, zc * sh, sh / zc, ch};
}

Abcd cascade_abcd(const TwoPortModel& model, double f_hz) {
  Abcd m;
  for (const auto& e : model.elements) m = m.then(element_abcd(e, model.cable, f_hz));
  return m;
}

void validate_grid(const dvec& grid) {
  if (grid.empty()) throw ValidationError("frequency grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < 0.0) throw ValidationError("frequency grid has negative entries");
    if (i > 0 && grid[i] <= grid[i - 1]) {
      throw ValidationError("frequency grid must be strictly increasing");
    }
  }
}

}  // namespace

void CableSpec::validate() const {
  if (!(length_m > 0.0)) throw ValidationError("cable length must be positive");
  if (!(z0_ohm > 0.0)) throw ValidationError("cable impedance must be positive");
  if (!(velocity_factor > 0.0) || !(velocity_factor < 1.0)) {
    throw ValidationError("velocity factor must lie in (0, 1)");
  }
  if (attenuation_db_per_m_at_1mhz < 0.0) {
    throw ValidationError("attenuation must be non-negative");
  }
  if (attenuation_freq_exponent < 0.4 || attenuation_freq_exponent > 1.0) {
    throw ValidationError("attenuation exponent must lie in [0.4, 1.0]");
  }
}

double CableSpec::attenuation_db_per_m(double f_hz) const {
  if (f_hz <= 0.0) return 0.0;
  return attenuation_db_per_m_at_1mhz * std::pow(f_hz / 1.0e6, attenuation_freq_exponent);
}

CableState severity_from_extent(double extent_m) {
  if (extent_m < 0.005) return CableState::Healthy;
  if (extent_m < 0.03) return CableState::SmallFault;
  return CableState::LargeFault;  // 3 cm damage already counts as large
}

double default_z_perturbation(CableState severity, double z0_ohm) {
  switch (severity) {
    case CableState::Healthy:    return 0.0;
    case CableState::SmallFault: return 0.05 * z0_ohm;
    case CableState::LargeFault: return 0.20 * z0_ohm;
  }
  return 0.0;
}

FaultSpec FaultSpec::make(double position_m, double extent_m, double z0_ohm,
                          std::optional<double> z_perturbation) {
  FaultSpec f;
  f.position_m = position_m;
  f.extent_m = extent_m;
  f.severity_class = severity_from_extent(extent_m);
  f.z_perturbation_ohm =
      z_perturbation ? *z_perturbation : default_z_perturbation(f.severity_class, z0_ohm);
  return f;
}

void FaultSpec::validate(double cable_length_m) const {
  if (position_m < 0.0 || position_m > cable_length_m) {
    throw ValidationError("fault position outside the cable");
  }
  if (extent_m <= 0.0) throw ValidationError("fault extent must be positive");
  if (position_m + extent_m > cable_length_m + 1e-9) {
    throw ValidationError("fault extends beyond the cable end");
  }
  if (severity_class != severity_from_extent(extent_m)) {
    throw ValidationError("fault severity class inconsistent with extent");
  }
  if (severity_class != CableState::Healthy && z_perturbation_ohm == 0.0) {
    throw ValidationError("fault needs a non-zero impedance perturbation");
  }
}

void LoadSpec::validate() const {
  if (power_w < 0.0 || power_w > 600.0) {
    throw ValidationError("load power must lie in [0, 600] W");
  }
  if (!(supply_v > 0.0)) throw ValidationError("supply voltage must be positive");
}

double LoadSpec::equivalent_impedance_ohm() const {
  if (open_circuit()) throw ValidationError("open load has no finite impedance");
  return supply_v * supply_v / power_w;
}

TwoPortModel build_line_model(const CableSpec& cable,
                              const std::vector<FaultSpec>& faults,
                              const LoadSpec& load) {
  cable.validate();
  load.validate();

  double cursor = 0.0;
  for (std::size_t i = 0; i < faults.size(); ++i) {
    faults[i].validate(cable.length_m);
    if (i > 0 && faults[i].position_m < faults[i - 1].position_m) {
      throw ValidationError("faults must be sorted by position");
    }
    if (faults[i].position_m < cursor) {
      throw ValidationError("faults overlap");
    }
    cursor = faults[i].position_m + faults[i].extent_m;
  }

  TwoPortModel model{cable, {}, load};
  double pos = 0.0;
  for (const auto& f : faults) {
    if (f.position_m > pos) {
      model.elements.push_back({LineElement::Kind::segment, f.position_m - pos,
                                cable.z0_ohm, 0.0});
    }
    model.elements.push_back({LineElement::Kind::shunt, 0.0, 0.0,
                              fault_conductance(f.z_perturbation_ohm, f.extent_m,
                                                cable.z0_ohm)});
    model.elements.push_back({LineElement::Kind::segment, f.extent_m,
                              cable.z0_ohm + f.z_perturbation_ohm, 0.0});
    pos = f.position_m + f.extent_m;
  }
  if (cable.length_m > pos) {
    model.elements.push_back({LineElement::Kind::segment, cable.length_m - pos,
                              cable.z0_ohm, 0.0});
  }
  return model;
}

cvec input_reflection_response(const TwoPortModel& model, const dvec& freq_grid_hz) {
  validate_grid(freq_grid_hz);
  cvec gamma(freq_grid_hz.size());
  const double z0 = model.cable.z0_ohm;

  for (std::size_t gi = 0; gi < freq_grid_hz.size(); ++gi) {
    const double f = freq_grid_hz[gi];
    // Fold the termination admittance leftwards through the cascade.
    cplx y = model.load.open_circuit()
                 ? cplx(0.0, 0.0)
                 : cplx(1.0 / model.load.equivalent_impedance_ohm(), 0.0);
    for (auto it = model.elements.rbegin(); it != model.elements.rend(); ++it) {
      if (it->kind == LineElement::Kind::shunt) {
        y += cplx(it->conductance_s, 0.0);
        continue;
      }
      const cplx t = std::tanh(propagation_constant(model.cable, f) * it->length_m);
      const cplx yc(1.0 / it->z_c_ohm, 0.0);
      y = yc * (y + yc * t) / (yc + y * t);
    }
    gamma[gi] = (1.0 - z0 * y) / (1.0 + z0 * y);
  }
  return gamma;
}

cvec transmission_response(const TwoPortModel& model, const dvec& freq_grid_hz) {
  validate_grid(freq_grid_hz);
  cvec h(freq_grid_hz.size());
  const double z0 = model.cable.z0_ohm;
  for (std::size_t gi = 0; gi < freq_grid_hz.size(); ++gi) {
    const Abcd m = cascade_abcd(model, freq_grid_hz[gi]);
    h[gi] = 2.0 / (m.a + m.b / z0 + m.c * z0 + m.d);
  }
  return h;
}

SMatrixTrace scattering_response(const TwoPortModel& model, const dvec& freq_grid_hz) {
  validate_grid(freq_grid_hz);
  SMatrixTrace s;
  s.freq_hz = freq_grid_hz;
  s.s11.resize(freq_grid_hz.size());
  s.s21.resize(freq_grid_hz.size());
  s.s12.resize(freq_grid_hz.size());
  s.s22.resize(freq_grid_hz.size());
  const double z0 = model.cable.z0_ohm;
  for (std::size_t gi = 0; gi < freq_grid_hz.size(); ++gi) {
    const Abcd m = cascade_abcd(model, freq_grid_hz[gi]);
    const cplx den = m.a + m.b / z0 + m.c * z0 + m.d;
    s.s11[gi] = (m.a + m.b / z0 - m.c * z0 - m.d) / den;
    s.s21[gi] = 2.0 / den;
    s.s12[gi] = 2.0 * (m.a * m.d - m.b * m.c) / den;
    s.s22[gi] = (-m.a + m.b / z0 - m.c * z0 + m.d) / den;
  }
  return s;
}

void ChannelRealization::validate() const {
  validate_grid(freq_grid_hz);
  if (gamma_in.size() != freq_grid_hz.size()) {
    throw ValidationError("gamma_in length does not match the grid");
  }
  if (!h_fwd.empty() && h_fwd.size() != freq_grid_hz.size()) {
    throw ValidationError("h_fwd length does not match the grid");
  }
}

std::size_t echo_fft_size(std::size_t probe_len) {
  return dsp::next_pow2(2 * probe_len);
}

dvec echo_eval_grid(double center_hz, double fs_hz, std::size_t n_fft) {
  if (!dsp::is_pow2(n_fft)) throw ValidationError("echo fft size must be a power of two");
  const double df = fs_hz / static_cast<double>(n_fft);
  std::set<double> freqs;
  for (std::size_t k = 0; k < n_fft; ++k) {
    const double kk = static_cast<double>(k);
    const double fb =
        (k <= n_fft / 2) ? kk * df : (kk - static_cast<double>(n_fft)) * df;
    freqs.insert(std::abs(center_hz + fb));
  }
  return dvec(freqs.begin(), freqs.end());
}

ChannelRealization realize_echo_channel(const TwoPortModel& model,
                                        double center_hz, double fs_hz,
                                        std::size_t n_fft, std::uint64_t noise_seed) {
  ChannelRealization r;
  r.freq_grid_hz = echo_eval_grid(center_hz, fs_hz, n_fft);
  r.gamma_in = input_reflection_response(model, r.freq_grid_hz);
  r.noise_seed = noise_seed;
  r.center_hz = center_hz;
  return r;
}

Waveform synthesize_echo(const Waveform& probe, const ChannelRealization& realization,
                         double snr_db, std::uint64_t seed) {
  realization.validate();
  if (probe.samples.empty()) throw ValidationError("probe is empty");
  if (!(probe.sample_rate_hz > 0.0)) throw ValidationError("probe sample rate must be positive");
  // +inf is the documented noise-free mode (noise variance underflows to 0).
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity()) {
    throw ValidationError("echo snr must be a number or +inf");
  }

  const std::size_t n_fft = echo_fft_size(probe.samples.size());
  const double fs = probe.sample_rate_hz;
  const double df = fs / static_cast<double>(n_fft);

  // Every FFT bin frequency must be present in the realization grid; bins
  // and grid entries come from the same exact arithmetic, so matching is by
  // equality, not tolerance.
  const dvec& grid = realization.freq_grid_hz;
  auto lookup = [&](double f_abs) -> std::size_t {
    auto it = std::lower_bound(grid.begin(), grid.end(), f_abs);
    if (it == grid.end() || *it != f_abs) {
      throw ValidationError("realization grid does not cover the probe band");
    }
    return static_cast<std::size_t>(it - grid.begin());
  };

  cvec spec = dsp::fft_padded(probe.samples, n_fft);
  for (std::size_t k = 0; k < n_fft; ++k) {
    const double kk = static_cast<double>(k);
    const double fb =
        (k <= n_fft / 2) ? kk * df : (kk - static_cast<double>(n_fft)) * df;
    const double f_rf = realization.center_hz + fb;
    const cplx g = realization.gamma_in[lookup(std::abs(f_rf))];
    spec[k] *= (f_rf >= 0.0) ? g : std::conj(g);
  }
  cvec echo = dsp::ifft(std::move(spec));

  const double noise_var = std::pow(10.0, -snr_db / 10.0);
  dsp::Rng rng(seed);
  for (auto& v : echo) v += rng.cgaussian(noise_var);

  return {std::move(echo), fs};
}

ImpulseView impulse_response(const dvec& freq_grid_hz, const cvec& gamma) {
  validate_grid(freq_grid_hz);
  if (gamma.size() != freq_grid_hz.size()) {
    throw ValidationError("gamma length does not match the grid");
  }
  if (freq_grid_hz.size() < 4) throw ValidationError("grid too short");
  const std::size_t m = freq_grid_hz.size() - 1;
  const double df = freq_grid_hz[1] - freq_grid_hz[0];
  if (std::abs(freq_grid_hz[0]) > 1e-9) {
    throw ValidationError("impulse view needs a grid starting at 0");
  }
  for (std::size_t i = 1; i < freq_grid_hz.size(); ++i) {
    if (std::abs(freq_grid_hz[i] - static_cast<double>(i) * df) > 1e-6 * df) {
      throw ValidationError("impulse view needs a uniform grid");
    }
  }
  const std::size_t n = dsp::next_pow2(2 * m);
  // One-sided spectrum, tapered, mirrored into hermitian symmetry.
  const dvec w = dsp::half_hann(m + 1);
  cvec spec(n, cplx(0.0, 0.0));
  spec[0] = cplx(gamma[0].real() * w[0], 0.0);
  for (std::size_t k = 1; k <= m; ++k) {
    const cplx v = gamma[k] * w[k];
    spec[k] = v;
    spec[n - k] = std::conj(v);
  }
  cvec h = dsp::ifft(std::move(spec));
  ImpulseView view;
  view.magnitude.resize(n);
  for (std::size_t i = 0; i < n; ++i) view.magnitude[i] = std::abs(h[i]);
  view.dt_s = 1.0 / (static_cast<double>(n) * df);
  return view;
}

std::vector<std::size_t> impulse_events(const ImpulseView& view, double rel_threshold) {
  if (view.magnitude.empty()) return {};
  const double peak = *std::max_element(view.magnitude.begin(), view.magnitude.end());
  const double th = rel_threshold * peak;
  std::vector<std::size_t> events;
  const auto& v = view.magnitude;
  // Only the causal half of the circular buffer is meaningful.
  const std::size_t half = v.size() / 2;
  for (std::size_t i = 0; i < half; ++i) {
    const double left = (i == 0) ? 0.0 : v[i - 1];
    const double right = (i + 1 < v.size()) ? v[i + 1] : 0.0;
    if (v[i] >= th && v[i] > left && v[i] >= right) events.push_back(i);
  }
  return events;
}

dvec synthesize_snr_trace(const TwoPortModel& model, const dvec& carriers_hz,
                          double tx_psd, double noise_psd, double sigma_db,
                          std::uint64_t seed) {
  if (!(tx_psd > 0.0) || !(noise_psd > 0.0)) {
    throw ValidationError("power spectral densities must be positive");
  }
  if (sigma_db < 0.0) throw ValidationError("snr jitter must be non-negative");
  const cvec h = transmission_response(model, carriers_hz);
  dsp::Rng rng(seed);
  dvec snr(carriers_hz.size());
  for (std::size_t i = 0; i < carriers_hz.size(); ++i) {
    const double mag2 = std::norm(h[i]);
    snr[i] = 10.0 * std::log10(tx_psd * mag2 / noise_psd);
    if (sigma_db > 0.0) snr[i] += sigma_db * rng.gaussian();
  }
  return snr;
}

}  // namespace cablewatch::chansim
