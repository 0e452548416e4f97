#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cablewatch/thresholds.hpp"
#include "cablewatch/types.hpp"

// Two-port scattering measurements and the channel frequency response
// derived from them. The CFR summary is the band-mean |S21|; degradation
// pulls it down, so its deviation score is healthy_ref - psi.

namespace cablewatch::sparam {

struct SParamRecord {
  dvec freq_hz;  // strictly increasing
  cvec s11, s21, s12, s22;
  std::string load_tag;  // free-form note on the load during capture

  void validate() const;
};

/// Touchstone two-port reader. Accepts HZ/KHZ/MHZ/GHZ and RI/MA/DB triplets;
/// parameter must be S. Parse failures carry the 1-based line number.
SParamRecord parse_touchstone(const std::filesystem::path& file);

/// Writer producing Hz/RI with full double precision; parse_touchstone
/// recovers the exact values.
void write_touchstone(const SParamRecord& rec, const std::filesystem::path& file);

struct CfrTrace {
  dvec freq_hz;
  cvec h;      // forward channel response (S21)
  double psi;  // band mean of |h|

  void validate() const;
};

CfrTrace cfr_from_sparams(const SParamRecord& rec);

/// Complex per-frequency mean over captures taken at different instants.
/// All traces must share one grid.
CfrTrace average_cfr(const std::vector<CfrTrace>& traces);

struct SparamClassification {
  double psi = 0.0;
  double deviation = 0.0;
  CableState verdict = CableState::Healthy;
  int flag = 0;
};

/// Deviation-model calibration for CFR summaries (drop_is_bad).
thresholds::DeviationModel derive_thresholds(const dvec& healthy_psi,
                                             const dvec& small_psi,
                                             const dvec& large_psi);

SparamClassification classify_sparam(double psi, const thresholds::DeviationModel& model);

}  // namespace cablewatch::sparam
