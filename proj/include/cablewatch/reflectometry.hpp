#pragma once

#include <cstdint>
#include <vector>

#include "cablewatch/thresholds.hpp"
#include "cablewatch/types.hpp"

// Multitone echo probing. A bank of orthogonal complex tones is injected at
// the supply end; the lag correlation of the reference signal against the
// capture compresses each reflection into one peak. Distances follow from
// peak lag, propagation velocity and the effective sample rate.

namespace cablewatch::reflect {

struct MultitoneConfig {
  double center_freq_hz = 3.0e7;   // carrier the tone block is translated to
  double sample_rate_hz = 5.0e6;   // occupied bandwidth
  unsigned oversampling = 32;      // waveform rate = sample_rate * oversampling
  unsigned n_tones = 64;
  std::vector<bool> active_tone_mask;  // empty means all tones active
  std::uint64_t seed = 1;          // tone phase schedule

  void validate() const;
  double effective_rate_hz() const;
  std::size_t symbol_length() const;  // n_tones * oversampling samples
  /// Baseband tone offsets; integer cycles over the symbol, DC excluded.
  dvec tone_offsets_hz() const;
  bool active(std::size_t tone) const;
  std::size_t active_count() const;

  bool operator==(const MultitoneConfig& o) const;
};

/// Masks every tone whose translated frequency falls in [f_lo, f_hi].
void mask_band(MultitoneConfig& cfg, double f_lo_hz, double f_hi_hz);

/// Unit-RMS probe symbol: sum of active tones with seeded phases.
Waveform generate_probe(const MultitoneConfig& cfg);

/// What the receive port records: the injected symbol (direct coupling)
/// summed with the line echoes.
Waveform receiver_capture(const Waveform& probe, Waveform echo);

struct Reflectogram {
  MultitoneConfig config;
  dvec values;          // |r(lag)|, lag 0 .. len(echo)-len(probe)
  cvec complex_values;  // r(lag) before the magnitude; empty for imported
                        // magnitude-only traces
  std::size_t tx_peak_index = 0;  // direct-coupling peak
  double meters_per_sample = 0.0;
};

/// Normalized lag correlation of probe against echo. velocity_factor is the
/// calibrated propagation constant of the cable under test; it only scales
/// the distance axis.
Reflectogram correlate(const Waveform& probe, const Waveform& echo,
                       const MultitoneConfig& cfg, double velocity_factor);

struct Peak {
  std::size_t sample_index = 0;
  double refined_index = 0.0;  // sub-sample lag estimate
  double magnitude = 0.0;
  double distance_m = 0.0;     // from the direct-coupling reference
};

struct PeakSet {
  std::vector<Peak> peaks;            // ascending by index
  std::size_t end_of_line_index = 0;  // line-end echo in the reference
};

/// Residual peaks above magnitude_threshold. With a baseline carrying
/// complex data the residual is coherent (r - baseline before the
/// magnitude) and peaks are extracted by matched-kernel successive
/// cancellation, which keeps weak echoes visible under the correlation
/// skirts of strong ones; components closer than one resolution cell
/// merge. Otherwise peaks are plain local maxima of max(r - baseline, 0),
/// or of r itself when no baseline is given. end_of_line_index locates the
/// line-end echo of the reference trace (the baseline when given, else r)
/// after the direct coupling is cancelled; on a matched termination there
/// is no such echo and the index falls back to the transmit peak.
PeakSet detect_peaks(const Reflectogram& r, const Reflectogram* baseline,
                     double magnitude_threshold);

/// Distances of the peaks from the injection point, in meters.
dvec localize(const Reflectogram& r, const PeakSet& peaks);

struct OmtdrClassification {
  double psi = 0.0;  // strongest fault-peak magnitude
  CableState verdict = CableState::Healthy;
  int flag = 0;
};

/// Severity from the strongest residual peak. An empty peak set is healthy
/// evidence with psi = 0.
OmtdrClassification classify_omtdr(const PeakSet& peaks,
                                   const thresholds::ThresholdPair& th);

}  // namespace cablewatch::reflect
