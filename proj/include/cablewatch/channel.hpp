#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cablewatch/types.hpp"

// Transmission-line model of a signaling cable between a power supply and a
// remote load box. A line is a cascade of uniform lossy segments; an
// insulation fault contributes a short segment with perturbed characteristic
// impedance plus a lumped leakage conductance at its leading edge. Echo and
// transfer responses are evaluated per frequency from the cascade.

namespace cablewatch::chansim {

struct CableSpec {
  double length_m = 0.0;
  double z0_ohm = 100.0;
  double velocity_factor = 0.66;               // fraction of c
  double attenuation_db_per_m_at_1mhz = 0.01;  // amplitude loss at 1 MHz
  double attenuation_freq_exponent = 0.5;      // alpha(f) = a1 * (f/1MHz)^k
  std::string label;

  void validate() const;
  /// Propagation velocity in m/s.
  double velocity() const { return velocity_factor * kSpeedOfLight; }
  /// Amplitude attenuation in dB/m at frequency f.
  double attenuation_db_per_m(double f_hz) const;
};

CableState severity_from_extent(double extent_m);

struct FaultSpec {
  double position_m = 0.0;  // leading edge, meters from the injection end
  double extent_m = 0.0;
  CableState severity_class = CableState::Healthy;
  double z_perturbation_ohm = 0.0;  // added to the segment's Zc

  /// Fills severity from extent and the default impedance step for that
  /// severity when they were left unset.
  static FaultSpec make(double position_m, double extent_m, double z0_ohm,
                        std::optional<double> z_perturbation = std::nullopt);
  void validate(double cable_length_m) const;
};

/// Default impedance step magnitude for a severity class, as a fraction of
/// the line impedance: small 5%, large 20%.
double default_z_perturbation(CableState severity, double z0_ohm);

struct LoadSpec {
  double power_w = 0.0;          // 0 means nothing connected (open end)
  double supply_v = 110.0;       // mains feed at the box

  void validate() const;
  bool open_circuit() const { return power_w <= 0.0; }
  /// Equivalent resistive impedance V^2 / P.
  double equivalent_impedance_ohm() const;
};

/// One element of the cascade, injection end first.
struct LineElement {
  enum class Kind { segment, shunt } kind = Kind::segment;
  // segment
  double length_m = 0.0;
  double z_c_ohm = 0.0;
  // shunt
  double conductance_s = 0.0;
};

struct TwoPortModel {
  CableSpec cable;
  std::vector<LineElement> elements;  // ordered, injection -> load
  LoadSpec load;
};

/// Expands cable + faults + load into the ordered cascade. Faults must be
/// sorted by position, non-overlapping, and inside the cable.
TwoPortModel build_line_model(const CableSpec& cable,
                              const std::vector<FaultSpec>& faults,
                              const LoadSpec& load);

/// Reflection coefficient seen from the injection end, referenced to the
/// healthy line impedance, with the load as termination. Grid must be
/// monotone increasing and non-negative.
cvec input_reflection_response(const TwoPortModel& model, const dvec& freq_grid_hz);

/// Forward voltage transfer (equals S21 of the cascade referenced to z0;
/// couplers at both ends present the line impedance). The far-end ac load
/// hangs behind the location-box interface and does not load this path.
cvec transmission_response(const TwoPortModel& model, const dvec& freq_grid_hz);

/// Full two-port scattering parameters of the cascade, reference z0.
struct SMatrixTrace {
  dvec freq_hz;
  cvec s11, s21, s12, s22;
};
SMatrixTrace scattering_response(const TwoPortModel& model, const dvec& freq_grid_hz);

/// One synthesized observation of the channel.
struct ChannelRealization {
  dvec freq_grid_hz;   // monotone increasing, non-negative
  cvec gamma_in;       // same length as the grid
  cvec h_fwd;          // same length as the grid (empty if not evaluated)
  std::uint64_t noise_seed = 0;
  // Carrier the grid was built around; echo synthesis maps FFT bins of a
  // baseband probe to grid entries through it. 0 for plain sweep grids.
  double center_hz = 0.0;

  void validate() const;
};

/// Transform length used when convolving a probe of the given length with a
/// reflection response: room for the probe plus an equal tail of echoes.
std::size_t echo_fft_size(std::size_t probe_len);

/// Frequency grid (RF, positive, sorted, deduplicated) covering every FFT
/// bin of an n_fft-point transform at rate fs_hz translated to carrier
/// center_hz. Bins whose RF image is negative are represented by their
/// mirror frequency; evaluation uses conjugate symmetry.
dvec echo_eval_grid(double center_hz, double fs_hz, std::size_t n_fft);

/// Realization of the reflection response on echo_eval_grid, for echo
/// synthesis against a probe at the given carrier and rate.
ChannelRealization realize_echo_channel(const TwoPortModel& model,
                                        double center_hz, double fs_hz,
                                        std::size_t n_fft,
                                        std::uint64_t noise_seed);

/// Applies gamma_in to the probe in the frequency domain (linear
/// convolution with the reflection impulse response) and adds complex white
/// noise at snr_db relative to the probe power; snr_db = +inf synthesizes
/// noise-free. Output length n_fft.
Waveform synthesize_echo(const Waveform& probe, const ChannelRealization& realization,
                         double snr_db, std::uint64_t seed);

/// Per-carrier SNR in dB: 10*log10(tx_psd * |h_fwd|^2 / noise_psd), plus
/// gaussian measurement jitter of sigma_db (0 = clean).
dvec synthesize_snr_trace(const TwoPortModel& model, const dvec& carriers_hz,
                          double tx_psd, double noise_psd, double sigma_db,
                          std::uint64_t seed);

/// Time-domain view of a reflection response sampled on a uniform grid
/// f_k = k*df. The one-sided spectrum is tapered (half-cosine) to suppress
/// truncation ringing, mirrored, and inverse transformed. Returns |h(t)|
/// with time step 1/(2*f_max_implied).
struct ImpulseView {
  dvec magnitude;
  double dt_s = 0.0;
};
ImpulseView impulse_response(const dvec& freq_grid_hz, const cvec& gamma);

/// Local maxima of an impulse view above rel_threshold * global max,
/// as sample indices.
std::vector<std::size_t> impulse_events(const ImpulseView& view, double rel_threshold);

}  // namespace cablewatch::chansim
