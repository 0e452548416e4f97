#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cablewatch {

using cplx = std::complex<double>;
using cvec = std::vector<cplx>;
using dvec = std::vector<double>;

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

/// Condition of a monitored cable. Ordering matters: several calibration
/// routines rely on Healthy < SmallFault < LargeFault.
enum class CableState : int { Healthy = 0, SmallFault = 1, LargeFault = 2 };

inline const char* to_string(CableState s) {
  switch (s) {
    case CableState::Healthy:    return "healthy";
    case CableState::SmallFault: return "small";
    case CableState::LargeFault: return "large";
  }
  return "?";
}

CableState state_from_string(const std::string& s);

/// Invalid parameters, inconsistent inputs, bad geometry.
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Malformed input file; message carries file position.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Calibration data cannot support the requested operation
/// (unordered classes, undefined posterior, degenerate weights).
struct CalibrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Filesystem-level failure.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Sampled complex waveform. sample_rate_hz is the rate the samples were
/// produced at (probe effective rate for reflectometry captures).
struct Waveform {
  cvec samples;
  double sample_rate_hz = 0.0;
};

}  // namespace cablewatch
