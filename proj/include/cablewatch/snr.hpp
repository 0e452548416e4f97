#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cablewatch/thresholds.hpp"
#include "cablewatch/types.hpp"

// Per-carrier SNR sweeps reported by powerline modems coupled to the cable.
// The summary is the band-mean SNR in dB; degradation pulls it down.

namespace cablewatch::snr {

struct SnrTrace {
  dvec carrier_hz;  // strictly increasing
  dvec snr_db;
  std::string end_tag;   // "near" or "far"
  int instant_id = 0;
  double load_w = 0.0;

  void validate() const;
};

/// CSV with header carrier_hz,snr_db,end,instant,load_w. Rows group into one
/// trace per (end, instant). Errors carry the 1-based row index.
std::vector<SnrTrace> parse_snr_csv(const std::filesystem::path& file);

/// Writer for the same layout; numbers round-trip exactly.
void write_snr_csv(const std::vector<SnrTrace>& traces, const std::filesystem::path& file);

struct SnrSummary {
  double psi = 0.0;  // mean snr over the carriers
  std::size_t carriers = 0;
};

SnrSummary summarize_snr(const SnrTrace& trace);

/// Deviation-model calibration for SNR summaries (drop_is_bad).
thresholds::DeviationModel derive_snr_thresholds(const dvec& healthy_psi,
                                                 const dvec& small_psi,
                                                 const dvec& large_psi);

struct SnrClassification {
  double psi = 0.0;
  double deviation = 0.0;
  CableState verdict = CableState::Healthy;
  int flag = 0;
};

SnrClassification classify_snr(double psi, const thresholds::DeviationModel& model);

}  // namespace cablewatch::snr
